#include "smoothstyle/config.hpp"

#include <fstream>
#include <set>

namespace smoothstyle::config {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& known,
                const std::string& where) {
  if (!j.is_object()) throw ConfigurationError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigurationError("unknown config key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void get(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

nlohmann::json data_to_json(const DataConfig& c) {
  return {{"kind", c.kind},
          {"root", c.root},
          {"image_size", c.image_size},
          {"channels", c.channels},
          {"train_fraction", c.train_fraction},
          {"n_train", c.n_train},
          {"n_test", c.n_test},
          {"gen_seed", c.gen_seed}};
}

DataConfig data_from_json(const nlohmann::json& j) {
  check_keys(j, {"kind", "root", "image_size", "channels", "train_fraction", "n_train", "n_test",
                 "gen_seed"},
             "data");
  DataConfig c;
  get(j, "kind", c.kind);
  get(j, "root", c.root);
  get(j, "image_size", c.image_size);
  get(j, "channels", c.channels);
  get(j, "train_fraction", c.train_fraction);
  get(j, "n_train", c.n_train);
  get(j, "n_test", c.n_test);
  get(j, "gen_seed", c.gen_seed);
  if (c.kind != "mnist" && c.kind != "synthetic" && c.kind != "folder") {
    throw ConfigurationError("data.kind must be mnist, synthetic or folder");
  }
  return c;
}

nlohmann::json backend_to_json(const BackendConfig& c) {
  return {{"kind", c.kind},
          {"weights", c.weights},
          {"train_if_missing", c.train_if_missing},
          {"classifier_epochs", c.classifier_epochs},
          {"projection_dim", c.projection_dim},
          {"projection_seed", c.projection_seed}};
}

BackendConfig backend_from_json(const nlohmann::json& j) {
  check_keys(j, {"kind", "weights", "train_if_missing", "classifier_epochs", "projection_dim",
                 "projection_seed"},
             "backend");
  BackendConfig c;
  get(j, "kind", c.kind);
  get(j, "weights", c.weights);
  get(j, "train_if_missing", c.train_if_missing);
  get(j, "classifier_epochs", c.classifier_epochs);
  get(j, "projection_dim", c.projection_dim);
  get(j, "projection_seed", c.projection_seed);
  static const std::set<std::string> kinds = {"lpips", "lpips_star", "pixel_l2",
                                              "random_projection"};
  if (!kinds.count(c.kind)) {
    throw ConfigurationError("backend.kind must be one of lpips, lpips_star, pixel_l2, "
                             "random_projection");
  }
  return c;
}

nlohmann::json eval_to_json(const EvalConfig& c) {
  return {{"ps_paths", c.ps_paths},
          {"ps_steps", c.ps_steps},
          {"strategy", c.strategy},
          {"fid_images", c.fid_images},
          {"fid_points", c.fid_points},
          {"fid_source", c.fid_source},
          {"fid_target", c.fid_target},
          {"diversity_images", c.diversity_images},
          {"diversity_styles", c.diversity_styles},
          {"diversity_target", c.diversity_target},
          {"ppl_epsilon", c.ppl_epsilon},
          {"ppl_samples", c.ppl_samples},
          {"linearity_counts", c.linearity_counts},
          {"linearity_paths", c.linearity_paths},
          {"gap_triplets", c.gap_triplets},
          {"endpoint_source", c.endpoint_source}};
}

EvalConfig eval_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"ps_paths", "ps_steps", "strategy", "fid_images", "fid_points", "fid_source",
              "fid_target", "diversity_images", "diversity_styles", "diversity_target",
              "ppl_epsilon", "ppl_samples", "linearity_counts", "linearity_paths", "gap_triplets",
              "endpoint_source"},
             "eval");
  EvalConfig c;
  get(j, "ps_paths", c.ps_paths);
  get(j, "ps_steps", c.ps_steps);
  get(j, "strategy", c.strategy);
  get(j, "fid_images", c.fid_images);
  get(j, "fid_points", c.fid_points);
  get(j, "fid_source", c.fid_source);
  get(j, "fid_target", c.fid_target);
  get(j, "diversity_images", c.diversity_images);
  get(j, "diversity_styles", c.diversity_styles);
  get(j, "diversity_target", c.diversity_target);
  get(j, "ppl_epsilon", c.ppl_epsilon);
  get(j, "ppl_samples", c.ppl_samples);
  get(j, "linearity_counts", c.linearity_counts);
  get(j, "linearity_paths", c.linearity_paths);
  get(j, "gap_triplets", c.gap_triplets);
  get(j, "endpoint_source", c.endpoint_source);
  if (c.strategy != "lerp" && c.strategy != "slerp") {
    throw ConfigurationError("eval.strategy must be lerp or slerp");
  }
  if (c.endpoint_source != "mapper" && c.endpoint_source != "encoder") {
    throw ConfigurationError("eval.endpoint_source must be mapper or encoder");
  }
  return c;
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  return {{"data", data_to_json(data)},
          {"train", training::train_config_to_json(train)},
          {"backend", backend_to_json(backend)},
          {"eval", eval_to_json(eval)},
          {"out_dir", out_dir},
          {"seed", seed}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"data", "train", "backend", "eval", "out_dir", "seed"}, "config");
  ExperimentConfig c;
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  if (j.contains("train")) c.train = training::train_config_from_json(j.at("train"));
  if (j.contains("backend")) c.backend = backend_from_json(j.at("backend"));
  if (j.contains("eval")) c.eval = eval_from_json(j.at("eval"));
  get(j, "out_dir", c.out_dir);
  get(j, "seed", c.seed);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError("config parse error in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigurationError("cannot write config to " + path.string());
  out << to_json().dump(2) << "\n";
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigurationError("override must look like key.path=value: " + assignment);
  }
  const auto key = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // bare string
  }

  auto j = to_json();
  nlohmann::json* node = &j;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) {
      throw ConfigurationError("unknown config key in override: " + key);
    }
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) {
    throw ConfigurationError("unknown config key in override: " + key);
  }
  (*node)[parts.back()] = value;
  *this = from_json(j);
}

std::pair<data::DomainDataset, data::DomainDataset> load_datasets(const DataConfig& cfg) {
  if (cfg.kind == "folder") {
    return {data::load_image_folder(cfg.root, data::Split::train, cfg.image_size,
                                    cfg.train_fraction, cfg.gen_seed, cfg.channels),
            data::load_image_folder(cfg.root, data::Split::test, cfg.image_size,
                                    cfg.train_fraction, cfg.gen_seed, cfg.channels)};
  }
  if (cfg.kind == "synthetic" && !data::has_idx_archives(cfg.root)) {
    data::generate_synthetic_digits(cfg.root, cfg.n_train, cfg.n_test, cfg.gen_seed);
  }
  return {data::load_mnist(cfg.root, data::Split::train, cfg.image_size),
          data::load_mnist(cfg.root, data::Split::test, cfg.image_size)};
}

}  // namespace smoothstyle::config
