#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "predbio/cate_model.hpp"
#include "predbio/manifest.hpp"
#include "predbio/stat_eval.hpp"
#include "predbio/tensor.hpp"

namespace predbio {

/// a: the manifest's x_prog column is prognostic. b: the roles are exchanged.
enum class FeatureSet { a, b };

std::string_view to_string(FeatureSet set);
FeatureSet parse_feature_set(std::string_view text);

struct GridSpec {
  std::vector<double> b_values;
  std::vector<FeatureSet> feature_sets{FeatureSet::a};
  std::vector<std::uint64_t> seeds{0};
  std::vector<HeadMode> modes{HeadMode::two_head, HeadMode::single_head};
  std::string dataset_id = "dataset";
  std::string model_spec_id = "model";
  double noise_sd = 0.0;
  double p_treat = 0.5;

  void validate() const;
  /// |b_values|^2 * |feature_sets| * |seeds| * |modes|
  std::size_t run_count() const;
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

struct RunTask {
  std::string run_key;
  double b_prog = 0.0;
  double b_pred = 0.0;
  HeadMode mode = HeadMode::two_head;
  std::uint64_t seed = 0;
  FeatureSet feature_set = FeatureSet::a;
  double noise_sd = 0.0;
  double p_treat = 0.5;
};

enum class RunStatus { done, failed };

struct RunRecord {
  std::string run_key;
  double b_prog = 0.0;
  double b_pred = 0.0;
  HeadMode mode = HeadMode::two_head;
  std::uint64_t seed = 0;
  FeatureSet feature_set = FeatureSet::a;
  PredictiveStrength model;
  double bound_lower = 0.0;  // ratio of the lower-bound fit
  double bound_upper = 0.0;  // ratio of the upper-bound fit
  RunStatus status = RunStatus::done;
  double wall_time_s = 0.0;
  std::string error;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

std::string run_key(const std::string& dataset_id, FeatureSet feature_set, double b_prog,
                    double b_pred, HeadMode mode, std::uint64_t seed,
                    const std::string& model_spec_id);

/// Hash of the model spec with the head mode left out (the mode is part of the run key).
std::string model_spec_id(const ModelSpec& spec);

/// Every task of the grid in a fixed order: feature set, mode, seed, b_prog, b_pred.
std::vector<RunTask> expand_grid(const GridSpec& spec);

/// Append-only JSONL store. Each record is written as one line and flushed
/// under a lock. Reading skips unparsable lines and keeps the last record per key.
class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  void append(const RunRecord& record);
  std::vector<RunRecord> load() const;

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct RunOutcome {
  PredictiveStrength model;
  StrengthBounds bounds;
};

using RunFunction = std::function<RunOutcome(const RunTask&)>;

/// Images and biomarker roles shared by every run of a grid.
struct GridData {
  Tensor images;             // (N, C, H, W), row-aligned with manifest
  DatasetManifest manifest;  // feature set a
};

/// simulate -> train -> candidate on the test split -> interaction fit -> bounds.
/// The run seed drives outcome simulation, initialisation and data order.
RunFunction make_pipeline_runner(const GridData& data, ModelSpec model, TrainConfig train);

struct GridOptions {
  std::size_t workers = 1;
  /// Stop after this many executed runs (used to simulate an interruption).
  std::optional<std::size_t> max_runs;
  std::function<void(const RunRecord&)> on_record;
};

struct GridResult {
  std::vector<RunRecord> records;  // store contents after the run, deduplicated
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

/// Runs every task whose key has no `done` record in the store. Failures are
/// stored with status failed and the grid continues.
GridResult run_grid(const GridSpec& spec, const RunFunction& run, ResultsStore& store,
                    const GridOptions& options = {});

struct BinStats {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double bound_lower_median = 0.0;
  double bound_upper_median = 0.0;

  bool empty() const noexcept { return count == 0; }
  double width() const noexcept { return upper - lower; }
};

/// Boxplot statistics of |t_pred / t_prog| over r = b_pred / b_prog bins.
/// Bins are [e_i, e_{i+1}) with the last one closed; ratios outside the edges
/// fall into the end bins. b_prog = 0 runs go to `infinite`.
struct BinnedSummary {
  FeatureSet feature_set = FeatureSet::a;
  HeadMode mode = HeadMode::two_head;
  std::vector<double> edges;
  std::vector<BinStats> bins;
  BinStats infinite;
  std::size_t degenerate = 0;
  std::size_t failed = 0;
  std::size_t total = 0;
};

/// Type-7 quantile of an ascending sequence.
double quantile_sorted(const std::vector<double>& sorted, double q);

/// 0 followed by `n_bins` log-spaced intervals over the positive finite ratios.
std::vector<double> default_bin_edges(const std::vector<RunRecord>& records,
                                      std::size_t n_bins = 6);

/// One summary per (feature set, mode) present in the records.
std::vector<BinnedSummary> aggregate_bins(const std::vector<RunRecord>& records,
                                          const std::vector<double>& edges);

struct ReportFiles {
  std::filesystem::path records;
  std::filesystem::path binned_csv;
  std::vector<std::filesystem::path> figures;
};

/// Writes records.jsonl, binned.csv and one boxplot_<feature set>.svg per feature set.
ReportFiles emit_report(const std::vector<BinnedSummary>& summaries,
                        const std::vector<RunRecord>& records,
                        const std::filesystem::path& out_dir);

/// Records ordered by feature set, mode, b_prog, b_pred, seed.
std::vector<RunRecord> sorted_records(std::vector<RunRecord> records);

}  // namespace predbio
