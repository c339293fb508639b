#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "predbio/attribution.hpp"
#include "predbio/cate_model.hpp"
#include "predbio/config.hpp"
#include "predbio/datasets.hpp"
#include "predbio/error.hpp"
#include "predbio/experiment.hpp"
#include "predbio/sim.hpp"
#include "predbio/stat_eval.hpp"

namespace fs = std::filesystem;
using namespace predbio;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;

  AppConfig load() const {
    return load_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path),
                       overrides);
  }
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_path, "JSON configuration file");
  cmd->add_option("--set", common.overrides, "Override a config value, e.g. training.epochs=5");
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct Arms {
  std::vector<int> T;
  std::vector<double> Y;
};

Arms read_arms(const fs::path& rct_path, const DatasetManifest& manifest) {
  const auto records = read_rct_csv(rct_path);
  if (records.size() != manifest.size()) {
    throw Error(Errc::shape_mismatch, rct_path.string() + " has " + std::to_string(records.size()) +
                                          " rows, the manifest " + std::to_string(manifest.size()));
  }
  Arms arms;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].sample_id != manifest.rows[i].sample_id) {
      throw Error(Errc::shape_mismatch, "row " + std::to_string(i) + " of " + rct_path.string() +
                                            " is " + records[i].sample_id + ", expected " +
                                            manifest.rows[i].sample_id);
    }
    arms.T.push_back(records[i].T);
    arms.Y.push_back(records[i].Y);
  }
  return arms;
}

fs::path default_checkpoint(const AppConfig& cfg) {
  return cfg.output_root / ("model_" + std::string(to_string(cfg.model.mode)) + ".ckpt");
}

int cmd_digits(const Common& common) {
  const auto cfg = common.load();
  const auto data = generate_dataset(cfg.dataset);
  std::cout << "wrote " << data.sample_ids.size() << " colored digits to "
            << cfg.dataset.root.string() << '\n';
  return kExitOk;
}

int cmd_simulate(const Common& common, const std::string& out_opt) {
  const auto cfg = common.load();
  const auto manifest = load_dataset_manifest(cfg.dataset);
  const auto records = build_rct_dataset(manifest, cfg.simulation);
  const fs::path out = out_opt.empty() ? cfg.output_root / "rct.csv" : fs::path(out_opt);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_rct_csv(records, out);
  auto jsonl = out;
  write_rct_jsonl(records, jsonl.replace_extension(".jsonl"));
  std::size_t treated = 0;
  for (const auto& r : records) treated += static_cast<std::size_t>(r.T);
  std::cout << "simulated " << records.size() << " records (" << treated << " treated) to "
            << out.string() << '\n';
  return kExitOk;
}

int cmd_train(const Common& common, const std::string& rct_opt, const std::string& ckpt_opt) {
  const auto cfg = common.load();
  const auto data = load_grid_data(cfg.dataset);
  const fs::path rct = rct_opt.empty() ? cfg.output_root / "rct.csv" : fs::path(rct_opt);
  const auto arms = read_arms(rct, data.manifest);
  const auto train_rows = data.manifest.indices(Split::train);
  const auto val_rows = data.manifest.indices(Split::val);
  const TrainingSet set{data.images, arms.T, arms.Y, train_rows, val_rows};
  const auto model = train(set, cfg.model, cfg.training);
  const fs::path ckpt = ckpt_opt.empty() ? default_checkpoint(cfg) : fs::path(ckpt_opt);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(model, ckpt);
  auto curve = ckpt;
  write_training_curve(model.meta(), curve.replace_extension(".curve.csv"));
  std::cout << "trained " << to_string(cfg.model.mode) << " model for " << model.meta().epochs_run
            << " epochs (best " << model.meta().best_epoch << ") -> " << ckpt.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Common& common, const std::string& rct_opt, const std::string& ckpt_opt) {
  const auto cfg = common.load();
  const auto manifest = load_dataset_manifest(cfg.dataset);
  const fs::path rct = rct_opt.empty() ? cfg.output_root / "rct.csv" : fs::path(rct_opt);
  const auto arms = read_arms(rct, manifest);
  const fs::path ckpt = ckpt_opt.empty() ? default_checkpoint(cfg) : fs::path(ckpt_opt);
  const auto model = load_checkpoint(ckpt);

  const auto test_rows = manifest.indices(Split::test);
  DatasetManifest test;
  test.base_dir = manifest.base_dir;
  std::vector<int> T;
  std::vector<double> Y, prog, pred;
  for (auto r : test_rows) {
    test.rows.push_back(manifest.rows[r]);
    T.push_back(arms.T[r]);
    Y.push_back(arms.Y[r]);
    prog.push_back(manifest.rows[r].x_prog);
    pred.push_back(manifest.rows[r].x_pred);
  }
  if (test.empty()) throw Error(Errc::empty_dataset, "the manifest has no test rows");
  const Tensor images = load_images(test);
  const auto candidate = model.mode() == HeadMode::two_head ? estimate_cate(model, images)
                                                            : baseline_candidate(model, images);
  const auto report = fit_interaction_ols(candidate, T, Y);
  const auto strength = predictive_strength(report);
  const auto bounds = compute_bounds(prog, pred, T, Y);
  const nlohmann::json result = {{"mode", to_string(model.mode())},
                                 {"checkpoint", ckpt.string()},
                                 {"n_test", test_rows.size()},
                                 {"regression", to_json(report)},
                                 {"strength", to_json(strength)},
                                 {"bound_lower", to_json(bounds.lower)},
                                 {"bound_upper", to_json(bounds.upper)}};
  const fs::path out = cfg.output_root / ("evaluation_" + std::string(to_string(model.mode())) + ".json");
  write_json(result, out);
  std::cout << result.dump(2) << '\n';
  return kExitOk;
}

int cmd_attribute(const Common& common, const std::string& ckpt_opt) {
  const auto cfg = common.load();
  const auto data = load_grid_data(cfg.dataset);
  const fs::path ckpt = ckpt_opt.empty() ? default_checkpoint(cfg) : fs::path(ckpt_opt);
  const auto model = load_checkpoint(ckpt);
  const auto& a = cfg.attribution;
  const auto test_rows = data.manifest.indices(Split::test);
  auto train_rows = data.manifest.indices(Split::train);
  if (train_rows.empty()) train_rows = test_rows;
  const Tensor baselines = select_baselines(data.images, train_rows, a.n_baselines, a.seed);
  const fs::path dir = cfg.output_root / "attributions";
  fs::create_directories(dir);

  const std::size_t count = std::min(a.n_images, test_rows.size());
  for (std::size_t i = 0; i < count; ++i) {
    const auto row = test_rows[i];
    Tensor image(data.images.sample_shape());
    const auto src = data.images.sample(row);
    std::copy(src.begin(), src.end(), image.values().begin());
    const auto map = a.method == AttributionMethod::expected_gradients
                         ? expected_gradients(model, image, baselines, a.target, a.k, a.seed)
                         : guided_gradcam(model, image, a.target);
    const std::string stem = data.manifest.rows[row].sample_id + "_" +
                             std::string(to_string(a.method)) + "_" + std::string(to_string(a.target));
    save_attribution_map(map, dir / (stem + ".attr"));
    render_overlay(map, image, dir / (stem + ".png"), a.per_channel);
  }
  std::cout << "wrote " << count << " attribution maps to " << dir.string() << '\n';
  return kExitOk;
}

fs::path results_path(const AppConfig& cfg) { return cfg.output_root / "grid" / "results.jsonl"; }

int cmd_grid(const Common& common, std::optional<std::size_t> max_runs) {
  const auto cfg = common.load();
  const auto data = load_grid_data(cfg.dataset);
  ResultsStore store(results_path(cfg));
  GridOptions options;
  options.workers = cfg.grid_workers;
  options.max_runs = max_runs;
  options.on_record = [](const RunRecord& r) {
    std::cout << to_string(r.feature_set) << ' ' << to_string(r.mode) << " b_prog=" << r.b_prog
              << " b_pred=" << r.b_pred << " seed=" << r.seed << ' '
              << (r.status == RunStatus::done ? "ratio=" + std::to_string(r.model.ratio)
                                              : "FAILED: " + r.error)
              << std::endl;
  };
  const auto runner = make_pipeline_runner(data, cfg.model, cfg.training);
  const auto result = run_grid(cfg.grid, runner, store, options);
  std::cout << "executed " << result.executed << ", skipped " << result.skipped << ", failed "
            << result.failed << "; " << result.records.size() << " records in "
            << store.path().string() << '\n';
  return result.failed > 0 ? kExitPartial : kExitOk;
}

int cmd_report(const Common& common, const std::string& results_opt, const std::string& out_opt) {
  const auto cfg = common.load();
  ResultsStore store(results_opt.empty() ? results_path(cfg) : fs::path(results_opt));
  const auto records = store.load();
  if (records.empty()) {
    throw Error(Errc::empty_dataset, "no run records in " + store.path().string());
  }
  const auto summaries = aggregate_bins(records, default_bin_edges(records, cfg.bins));
  const auto files =
      emit_report(summaries, records, out_opt.empty() ? cfg.output_root / "report" : fs::path(out_opt));
  std::cout << "wrote " << files.records.string() << ", " << files.binned_csv.string();
  for (const auto& f : files.figures) std::cout << ", " << f.string();
  std::cout << '\n';
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.status == RunStatus::failed;
  return failed > 0 ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive biomarker discovery benchmark"};
  app.require_subcommand(1);
  Common common;

  auto* digits = app.add_subcommand("digits", "Generate the colored-digit dataset");
  add_common(digits, common);

  std::string out_opt, rct_opt, ckpt_opt, results_opt;
  auto* simulate = app.add_subcommand("simulate", "Assign treatments and simulate outcomes");
  add_common(simulate, common);
  simulate->add_option("-o,--out", out_opt, "Output CSV (default <output.root>/rct.csv)");

  auto* train_cmd = app.add_subcommand("train", "Train a two_head or single_head model");
  add_common(train_cmd, common);
  train_cmd->add_option("--rct", rct_opt, "Simulated trial CSV");
  train_cmd->add_option("--checkpoint", ckpt_opt, "Checkpoint to write");

  auto* evaluate = app.add_subcommand("evaluate", "Interaction regression on the test split");
  add_common(evaluate, common);
  evaluate->add_option("--rct", rct_opt, "Simulated trial CSV");
  evaluate->add_option("--checkpoint", ckpt_opt, "Checkpoint to read");

  auto* attribute = app.add_subcommand("attribute", "Attribution maps for test images");
  add_common(attribute, common);
  attribute->add_option("--checkpoint", ckpt_opt, "Checkpoint to read");

  std::optional<std::size_t> max_runs;
  auto* grid = app.add_subcommand("grid", "Run the (b_prog, b_pred) grid");
  add_common(grid, common);
  grid->add_option("--max-runs", max_runs, "Stop after this many runs");

  auto* report = app.add_subcommand("report", "Aggregate grid results into bins and plots");
  add_common(report, common);
  report->add_option("--results", results_opt, "Results JSONL");
  report->add_option("-o,--out", out_opt, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*digits) return cmd_digits(common);
    if (*simulate) return cmd_simulate(common, out_opt);
    if (*train_cmd) return cmd_train(common, rct_opt, ckpt_opt);
    if (*evaluate) return cmd_evaluate(common, rct_opt, ckpt_opt);
    if (*attribute) return cmd_attribute(common, ckpt_opt);
    if (*grid) return cmd_grid(common, max_runs);
    if (*report) return cmd_report(common, results_opt, out_opt);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
