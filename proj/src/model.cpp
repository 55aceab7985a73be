#include "cfmsa/model.hpp"

#include <fstream>
#include <iterator>

#include "cfmsa/error.hpp"

namespace cfmsa {

using nlohmann::json;
using nlohmann::ordered_json;

ModelDims ModelParams::dims() const {
  return {text.input_dim(), image.input_dim(), text.hidden_dim(), text.num_classes()};
}

ModelParams init_model(const ModelDims& dims, CMode c_mode, std::uint64_t seed,
                       std::span<const double> class_frequencies,
                       std::vector<std::string> labels) {
  if (dims.d_t == 0 || dims.d_i == 0 || dims.num_classes == 0) {
    throw ConfigError("model dims: d_t, d_i and num_classes must be positive");
  }
  if (labels.size() != dims.num_classes) {
    throw ConfigError("labels: expected " + std::to_string(dims.num_classes) + " names");
  }
  const ModelSeeds seeds{4 * seed + 1, 4 * seed + 2, 4 * seed + 3, 4 * seed + 4};
  CParams c = [&] {
    switch (c_mode) {
      case CMode::kRandom: return CParams::random(dims.num_classes, seeds.c);
      case CMode::kPrior:
        if (class_frequencies.size() != dims.num_classes) {
          throw ConfigError("c_mode prior: class frequencies required for every class");
        }
        return CParams::prior(class_frequencies);
      case CMode::kUniform: return CParams::uniform(dims.num_classes);
      case CMode::kNonUniform: return CParams::nonuniform(dims.num_classes);
    }
    throw ConfigError("c_mode: unknown");
  }();
  return ModelParams{init_branch(dims.d_t, dims.hidden_dim, dims.num_classes, seeds.text),
                     init_branch(dims.d_i, dims.hidden_dim, dims.num_classes, seeds.image),
                     init_branch(dims.d_t + dims.d_i, dims.hidden_dim, dims.num_classes,
                                 seeds.joint),
                     std::move(c), std::move(labels), seeds};
}

void check_compatible(const ModelParams& params, const DatasetHeader& header) {
  const ModelDims d = params.dims();
  if (header.d_t != d.d_t || header.d_i != d.d_i || header.num_classes() != d.num_classes) {
    throw DimensionMismatch("dataset header (d_t=" + std::to_string(header.d_t) +
                            ", d_i=" + std::to_string(header.d_i) +
                            ", classes=" + std::to_string(header.num_classes()) +
                            ") does not match model (d_t=" + std::to_string(d.d_t) +
                            ", d_i=" + std::to_string(d.d_i) +
                            ", classes=" + std::to_string(d.num_classes) + ")");
  }
}

ForwardPass forward(const ModelParams& params, const Sample& sample) {
  if (!sample.text && !sample.image) {
    throw InvalidInput("sample '" + sample.id + "': no modality present");
  }
  ForwardPass fp;
  Vec z_t, z_i, z_k;
  if (sample.text) {
    fp.text = forward(params.text, *sample.text);
    z_t = fp.text->logits;
  } else {
    z_t = params.c.slot(CSlot::kText);
  }
  if (sample.image) {
    fp.image = forward(params.image, *sample.image);
    z_i = fp.image->logits;
  } else {
    z_i = params.c.slot(CSlot::kImage);
  }
  if (sample.text && sample.image) {
    fp.joint = forward(params.joint, concat(*sample.text, *sample.image));
    z_k = fp.joint->logits;
  } else if (sample.text) {
    z_k = params.c.slot(CSlot::kJointTextOnly);
  } else {
    z_k = params.c.slot(CSlot::kJointImageOnly);
  }
  fp.bundle = assemble(std::move(z_t), std::move(z_i), std::move(z_k), params.c);
  return fp;
}

BranchGradients::BranchGradients(const ModelParams& params)
    : text(params.text.values().size(), 0.0),
      image(params.image.values().size(), 0.0),
      joint(params.joint.values().size(), 0.0) {}

namespace {

Vec scaled(Vec v, double s) {
  for (double& x : v) x *= s;
  return v;
}

}  // namespace

void accumulate_cls_grad(const ModelParams& params, const ForwardPass& fp, ClassIndex label,
                         std::span<const double> weights, double scale, BranchGradients& out,
                         ClsSelection which) {
  which.text = which.text && fp.has_text();
  which.image = which.image && fp.has_image();
  const ClsLogitGrad g = l_cls_grad(fp.bundle, label, weights, which);
  if (fp.text) backward(params.text, *fp.text, scaled(g.z_t, scale), out.text);
  if (fp.image) backward(params.image, *fp.image, scaled(g.z_i, scale), out.image);
  if (fp.joint) backward(params.joint, *fp.joint, scaled(g.z_k, scale), out.joint);
}

void accumulate_c_grad(const ModelParams& params, const ForwardPass& fp, double scale,
                       std::span<double> out) {
  if (out.size() != params.c.values().size()) throw DimensionMismatch("c gradient buffer size");
  const Vec g = params.c.reduce_grad(c_objective_grad(fp.bundle));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * g[i];
}

LossBreakdown sample_losses(const ForwardPass& fp, ClassIndex label,
                            std::span<const double> weights) {
  ClsTerms cls = l_cls(fp.bundle, label, weights);
  if (!fp.has_text()) cls.text = 0.0;
  if (!fp.has_image()) cls.image = 0.0;
  return total_loss(cls, l_kl(fp.bundle), l_ti(fp.bundle));
}

namespace {

ordered_json branch_to_json(const BranchParams& b, std::uint64_t seed) {
  ordered_json j;
  j["input_dim"] = b.input_dim();
  j["hidden_dim"] = b.hidden_dim();
  j["num_classes"] = b.num_classes();
  j["seed"] = seed;
  j["values"] = Vec(b.values().begin(), b.values().end());
  return j;
}

BranchParams branch_from_json(const json& j) {
  return BranchParams(j.at("input_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>(),
                      j.at("num_classes").get<std::size_t>(), j.at("values").get<Vec>());
}

}  // namespace

ordered_json checkpoint_to_json(const ModelParams& params) {
  const ModelDims d = params.dims();
  ordered_json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["dims"] = {{"d_t", d.d_t}, {"d_i", d.d_i}, {"hidden_dim", d.hidden_dim},
               {"num_classes", d.num_classes}};
  j["labels"] = params.labels;
  j["seeds"] = {{"text", params.seeds.text},
                {"image", params.seeds.image},
                {"joint", params.seeds.joint},
                {"c", params.seeds.c}};
  j["branches"] = {{"text", branch_to_json(params.text, params.seeds.text)},
                   {"image", branch_to_json(params.image, params.seeds.image)},
                   {"joint", branch_to_json(params.joint, params.seeds.joint)}};
  j["c"] = {{"mode", to_string(params.c.mode())},
            {"learnable", params.c.learnable()},
            {"values", Vec(params.c.values().begin(), params.c.values().end())}};
  return j;
}

ModelParams checkpoint_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
      throw ParseError("checkpoint: unsupported schema_version");
    }
    const json& dims = j.at("dims");
    const std::size_t k = dims.at("num_classes").get<std::size_t>();
    const json& br = j.at("branches");
    const json& seeds = j.at("seeds");
    ModelParams p{branch_from_json(br.at("text")),
                  branch_from_json(br.at("image")),
                  branch_from_json(br.at("joint")),
                  CParams::from_values(parse_c_mode(j.at("c").at("mode").get<std::string>()), k,
                                       j.at("c").at("values").get<Vec>()),
                  j.at("labels").get<std::vector<std::string>>(),
                  {seeds.at("text").get<std::uint64_t>(), seeds.at("image").get<std::uint64_t>(),
                   seeds.at("joint").get<std::uint64_t>(), seeds.at("c").get<std::uint64_t>()}};
    const ModelDims d = p.dims();
    if (d.d_t != dims.at("d_t").get<std::size_t>() || d.d_i != dims.at("d_i").get<std::size_t>() ||
        p.image.num_classes() != k || p.joint.num_classes() != k || d.num_classes != k ||
        p.joint.input_dim() != d.d_t + d.d_i || p.labels.size() != k) {
      throw ParseError("checkpoint: branch shapes disagree with dims");
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

std::string serialize_checkpoint(const ModelParams& params, const ordered_json* run_config) {
  ordered_json j = checkpoint_to_json(params);
  if (run_config) j["run_config"] = *run_config;
  return j.dump(1) + "\n";
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const ordered_json* run_config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(params, run_config);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace cfmsa
