#include "namegate/config.hpp"

#include <fstream>
#include <sstream>

#include "namegate/errors.hpp"

namespace namegate {

namespace {

template <typename T>
T field(const nlohmann::json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "adamw") return OptimizerKind::AdamW;
  throw ConfigError("model.optimizer must be 'adam' or 'adamw', got '" + name + "'");
}

ModelOptions parse_model(const nlohmann::json& m, std::optional<ModelKind> kind_override) {
  require_object(m, "model");
  if (!m.contains("kind") && !kind_override) throw ConfigError("model.kind is required");
  const ModelKind kind =
      kind_override ? *kind_override : parse_model_kind(field<std::string>(m["kind"], "model.kind"));
  ModelOptions o = ModelOptions::defaults_for(kind);
  for (const auto& [key, v] : m.items()) {
    const std::string where = "model." + key;
    if (key == "kind") continue;
    else if (key == "shared_dim") o.shared_dim = field<std::size_t>(v, where);
    else if (key == "hidden_dim") o.hidden_dim = field<std::size_t>(v, where);
    else if (key == "positive_template") o.templates.positive_template = field<std::string>(v, where);
    else if (key == "negative_text") o.templates.negative_text = field<std::string>(v, where);
    else if (key == "drop_duplicate_labels") o.drop_duplicate_labels = field<bool>(v, where);
    else if (key == "optimizer") o.optimizer = parse_optimizer(field<std::string>(v, where));
    else if (key == "beta1") o.hyper.beta1 = field<double>(v, where);
    else if (key == "beta2") o.hyper.beta2 = field<double>(v, where);
    else if (key == "eps") o.hyper.eps = field<double>(v, where);
    else if (key == "weight_decay") o.hyper.weight_decay = field<double>(v, where);
    else if (key == "decay_scalars") o.decay_scalars = field<bool>(v, where);
    else if (key == "batchnorm_momentum") o.batchnorm_momentum = field<double>(v, where);
    else if (key == "batchnorm_eps") o.batchnorm_eps = field<double>(v, where);
    else if (key == "keep_accents") o.keep_accents = field<bool>(v, where);
    else if (key == "raw_substring") o.raw_substring = field<bool>(v, where);
    else throw ConfigError("unknown key '" + where + "'");
  }
  if (o.shared_dim < 1 || o.hidden_dim < 1) throw ConfigError("model dimensions must be >= 1");
  if (!(o.batchnorm_momentum >= 0.0 && o.batchnorm_momentum <= 1.0)) {
    throw ConfigError("model.batchnorm_momentum must be in [0, 1]");
  }
  if (!(o.batchnorm_eps > 0.0)) throw ConfigError("model.batchnorm_eps must be > 0");
  o.templates.validate();
  return o;
}

TrainConfig parse_train(const nlohmann::json& t, ModelKind kind) {
  require_object(t, "train");
  TrainConfig c;
  c.lr_grid = TrainConfig::default_lr_grid(kind);
  for (const auto& [key, v] : t.items()) {
    const std::string where = "train." + key;
    if (key == "max_epochs") c.max_epochs = field<std::size_t>(v, where);
    else if (key == "batch_size") c.batch_size = field<std::size_t>(v, where);
    else if (key == "validate_every") c.validate_every = field<std::size_t>(v, where);
    else if (key == "lr_grid") c.lr_grid = field<std::vector<double>>(v, where);
    else if (key == "patience") c.patience = field<std::size_t>(v, where);
    else throw ConfigError("unknown key '" + where + "'");
  }
  c.validate();
  return c;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                           std::optional<ModelKind> kind_override) {
  require_object(j, "run configuration");
  RunConfig c;
  c.base_dir = base_dir;
  for (const auto& [key, _] : j.items()) {
    if (key != "data" && key != "model" && key != "train" && key != "eval" && key != "seed") {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (!j.contains("data")) throw ConfigError("'data' section is required");
  const auto& data = j["data"];
  require_object(data, "data");
  for (const auto& [key, v] : data.items()) {
    if (key == "manifest") c.manifest = field<std::string>(v, "data.manifest");
    else if (key == "provider") {
      require_object(v, "data.provider");
      c.provider = v;
    } else {
      throw ConfigError("unknown key 'data." + key + "'");
    }
  }
  if (c.manifest.empty()) throw ConfigError("data.manifest is required");

  c.model = parse_model(j.value("model", nlohmann::json::object()), kind_override);
  c.train = parse_train(j.value("train", nlohmann::json::object()), c.model.kind);
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    require_object(e, "eval");
    for (const auto& [key, v] : e.items()) {
      if (key == "write_predictions") c.eval.write_predictions = field<bool>(v, "eval." + key);
      else if (key == "write_checkpoints") c.eval.write_checkpoints = field<bool>(v, "eval." + key);
      else throw ConfigError("unknown key 'eval." + key + "'");
    }
  }
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j["seed"], "seed");
  c.train.seed = c.seed;
  if (c.model.kind == ModelKind::Matcher && c.provider.is_null()) {
    throw ConfigError("the matcher needs data.provider");
  }
  return c;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path, std::optional<ModelKind> kind_override) {
  const auto j = read_json_file(path);
  return parse_run_config(j, std::filesystem::absolute(path).parent_path(), kind_override);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json data;
  data["manifest"] = c.manifest.string();
  if (!c.provider.is_null()) data["provider"] = nlohmann::ordered_json::parse(c.provider.dump());
  j["data"] = std::move(data);
  nlohmann::ordered_json m;
  m["kind"] = to_string(c.model.kind);
  m["shared_dim"] = c.model.shared_dim;
  m["hidden_dim"] = c.model.hidden_dim;
  m["positive_template"] = c.model.templates.positive_template;
  m["negative_text"] = c.model.templates.negative_text;
  m["drop_duplicate_labels"] = c.model.drop_duplicate_labels;
  m["optimizer"] = c.model.optimizer == OptimizerKind::Adam ? "adam" : "adamw";
  m["beta1"] = c.model.hyper.beta1;
  m["beta2"] = c.model.hyper.beta2;
  m["eps"] = c.model.hyper.eps;
  m["weight_decay"] = c.model.hyper.weight_decay;
  m["decay_scalars"] = c.model.decay_scalars;
  m["batchnorm_momentum"] = c.model.batchnorm_momentum;
  m["batchnorm_eps"] = c.model.batchnorm_eps;
  m["keep_accents"] = c.model.keep_accents;
  m["raw_substring"] = c.model.raw_substring;
  j["model"] = std::move(m);
  j["train"] = {{"max_epochs", c.train.max_epochs},
                {"batch_size", c.train.batch_size},
                {"validate_every", c.train.validate_every},
                {"lr_grid", c.train.lr_grid},
                {"patience", c.train.patience}};
  j["eval"] = {{"write_predictions", c.eval.write_predictions}, {"write_checkpoints", c.eval.write_checkpoints}};
  j["seed"] = c.seed;
  return j;
}

}  // namespace namegate
