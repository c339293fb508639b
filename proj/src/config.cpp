#include "predbio/config.hpp"

#include <cstdlib>
#include <fstream>

#include "predbio/error.hpp"

namespace predbio {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const nlohmann::json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(Errc::config, "'" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(Errc::config, "unknown key '" + section + "." + key + "'");
  }
}

}  // namespace

std::filesystem::path DatasetConfig::manifest_path() const {
  if (kind == "annotations") return annotations;
  return root / "manifest.csv";
}

void AppConfig::validate() const {
  if (dataset.kind != "colored_digits" && dataset.kind != "annotations") {
    throw Error(Errc::config, "dataset.kind must be 'colored_digits' or 'annotations'");
  }
  if (dataset.kind == "annotations" && dataset.annotations.empty()) {
    throw Error(Errc::config, "dataset.annotations is required for kind 'annotations'");
  }
  if (dataset.n == 0) throw Error(Errc::config, "dataset.n must be >= 1");
  dataset.colored.validate();
  simulation.validate();
  model.validate();
  training.validate();
  grid.validate();
  if (grid_workers == 0) throw Error(Errc::config, "grid.workers must be >= 1");
  if (bins == 0) throw Error(Errc::config, "grid.bins must be >= 1");
  if (attribution.k == 0) throw Error(Errc::config, "attribution.k must be >= 1");
  if (attribution.n_baselines == 0) throw Error(Errc::config, "attribution.n_baselines must be >= 1");
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(Errc::config, "override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(Errc::config, "override '" + assignment + "' has an empty key");
    if (!node->is_object()) {
      if (!node->is_null()) throw Error(Errc::config, "override '" + assignment + "' descends into a non-object");
      *node = nlohmann::json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

AppConfig config_from_json(const nlohmann::json& doc) {
  check_keys(doc, "config",
             {"dataset", "simulation", "model", "training", "grid", "attribution", "output"});
  AppConfig c;
  try {
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      check_keys(d, "dataset",
                 {"kind", "id", "root", "n", "seed", "split_fractions", "colored", "idx_images",
                  "idx_labels", "annotations", "prog_column", "pred_column", "normalize"});
      read_field(d, "kind", c.dataset.kind);
      read_field(d, "id", c.dataset.id);
      if (d.contains("root")) c.dataset.root = d.at("root").get<std::string>();
      read_field(d, "n", c.dataset.n);
      read_field(d, "seed", c.dataset.seed);
      read_field(d, "split_fractions", c.dataset.split_fractions);
      if (d.contains("colored")) c.dataset.colored = d.at("colored").get<ColoredDigitSpec>();
      if (d.contains("idx_images")) c.dataset.idx_images = d.at("idx_images").get<std::string>();
      if (d.contains("idx_labels")) c.dataset.idx_labels = d.at("idx_labels").get<std::string>();
      if (d.contains("annotations")) c.dataset.annotations = d.at("annotations").get<std::string>();
      read_field(d, "prog_column", c.dataset.prog_column);
      read_field(d, "pred_column", c.dataset.pred_column);
      read_field(d, "normalize", c.dataset.normalize);
    }
    if (doc.contains("simulation")) c.simulation = doc.at("simulation").get<OutcomeSimConfig>();

    nlohmann::json model = doc.value("model", nlohmann::json::object());
    if (!model.contains("input_shape")) {
      model["input_shape"] = Shape{3, c.dataset.colored.image_size, c.dataset.colored.image_size};
    }
    c.model = model.get<ModelSpec>();
    if (doc.contains("training")) c.training = doc.at("training").get<TrainConfig>();

    nlohmann::json grid = doc.value("grid", nlohmann::json::object());
    read_field(grid, "workers", c.grid_workers);
    read_field(grid, "bins", c.bins);
    grid.erase("workers");
    grid.erase("bins");
    if (!grid.contains("dataset_id")) grid["dataset_id"] = c.dataset.id;
    if (!grid.contains("model_spec_id")) grid["model_spec_id"] = model_spec_id(c.model);
    if (!grid.contains("b_values")) grid["b_values"] = {0.0, 0.5, 1.0};
    c.grid = grid.get<GridSpec>();

    if (doc.contains("attribution")) {
      const auto& a = doc.at("attribution");
      check_keys(a, "attribution", {"method", "target", "k", "n_baselines", "seed", "n_images", "per_channel"});
      if (a.contains("method")) {
        const auto m = a.at("method").get<std::string>();
        if (m == "expected_gradients") {
          c.attribution.method = AttributionMethod::expected_gradients;
        } else if (m == "guided_gradcam") {
          c.attribution.method = AttributionMethod::guided_gradcam;
        } else {
          throw Error(Errc::config, "attribution.method must be expected_gradients or guided_gradcam");
        }
      }
      if (a.contains("target")) c.attribution.target = parse_attribution_target(a.at("target").get<std::string>());
      read_field(a, "k", c.attribution.k);
      read_field(a, "n_baselines", c.attribution.n_baselines);
      read_field(a, "seed", c.attribution.seed);
      read_field(a, "n_images", c.attribution.n_images);
      read_field(a, "per_channel", c.attribution.per_channel);
    }
    if (doc.contains("output")) {
      const auto& o = doc.at("output");
      check_keys(o, "output", {"root"});
      if (o.contains("root")) c.output_root = o.at("root").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("invalid configuration: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const AppConfig& c) {
  nlohmann::json grid = c.grid;
  grid["workers"] = c.grid_workers;
  grid["bins"] = c.bins;
  return {{"dataset",
           {{"kind", c.dataset.kind},
            {"id", c.dataset.id},
            {"root", c.dataset.root.string()},
            {"n", c.dataset.n},
            {"seed", c.dataset.seed},
            {"split_fractions", c.dataset.split_fractions},
            {"colored", c.dataset.colored},
            {"idx_images", c.dataset.idx_images.string()},
            {"idx_labels", c.dataset.idx_labels.string()},
            {"annotations", c.dataset.annotations.string()},
            {"prog_column", c.dataset.prog_column},
            {"pred_column", c.dataset.pred_column},
            {"normalize", c.dataset.normalize}}},
          {"simulation", c.simulation},
          {"model", c.model},
          {"training", c.training},
          {"grid", grid},
          {"attribution",
           {{"method", to_string(c.attribution.method)},
            {"target", to_string(c.attribution.target)},
            {"k", c.attribution.k},
            {"n_baselines", c.attribution.n_baselines},
            {"seed", c.attribution.seed},
            {"n_images", c.attribution.n_images},
            {"per_channel", c.attribution.per_channel}}},
          {"output", {{"root", c.output_root.string()}}}};
}

ColoredDigits generate_dataset(const DatasetConfig& dataset) {
  if (dataset.kind != "colored_digits") {
    throw Error(Errc::config, "only colored_digits datasets can be generated");
  }
  const DigitImages source =
      dataset.idx_images.empty()
          ? synthesize_digits(dataset.n, dataset.colored.image_size, dataset.seed)
          : load_idx_digits(dataset.idx_images, dataset.idx_labels, dataset.n);
  return generate_colored_digits(source, dataset.colored, dataset.seed, dataset.root,
                                 dataset.split_fractions);
}

DatasetManifest load_dataset_manifest(const DatasetConfig& dataset) {
  if (dataset.kind == "annotations") {
    return load_annotation_table(dataset.annotations, dataset.prog_column, dataset.pred_column,
                                 dataset.normalize);
  }
  return read_manifest(dataset.manifest_path());
}

GridData load_grid_data(const DatasetConfig& dataset) {
  GridData data;
  data.manifest = load_dataset_manifest(dataset);
  data.images = load_images(data.manifest);
  return data;
}

AppConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(Errc::config, "cannot open config file " + path->string());
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(Errc::config, path->string() + " is not valid JSON");
  }
  if (const char* root = std::getenv("PREDBIO_OUTPUT_ROOT"); root && *root) {
    doc["output"]["root"] = root;
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

}  // namespace predbio
