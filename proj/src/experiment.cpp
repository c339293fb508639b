#include "predbio/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "predbio/error.hpp"
#include "predbio/rng.hpp"
#include "predbio/sim.hpp"

namespace predbio {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(FeatureSet set) { return set == FeatureSet::a ? "a" : "b"; }

FeatureSet parse_feature_set(std::string_view text) {
  if (text == "a") return FeatureSet::a;
  if (text == "b") return FeatureSet::b;
  throw Error(Errc::config, "unknown feature set '" + std::string(text) + "' (expected a or b)");
}

void GridSpec::validate() const {
  if (b_values.empty()) throw Error(Errc::config, "grid.b_values must not be empty");
  for (double b : b_values) {
    if (!std::isfinite(b) || b < 0.0) throw Error(Errc::config, "grid.b_values must be finite and >= 0");
  }
  if (feature_sets.empty()) throw Error(Errc::config, "grid.feature_sets must not be empty");
  if (seeds.empty()) throw Error(Errc::config, "grid.seeds must not be empty");
  if (modes.empty()) throw Error(Errc::config, "grid.modes must not be empty");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw Error(Errc::config, "grid.noise_sd must be finite and >= 0");
  }
  if (!(p_treat > 0.0 && p_treat < 1.0)) throw Error(Errc::config, "grid.p_treat must be in (0, 1)");
}

std::size_t GridSpec::run_count() const {
  return b_values.size() * b_values.size() * feature_sets.size() * seeds.size() * modes.size();
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  std::vector<std::string> fs, modes;
  for (auto f : g.feature_sets) fs.emplace_back(to_string(f));
  for (auto m : g.modes) modes.emplace_back(to_string(m));
  j = {{"b_values", g.b_values}, {"feature_sets", fs},          {"seeds", g.seeds},
       {"modes", modes},         {"dataset_id", g.dataset_id}, {"model_spec_id", g.model_spec_id},
       {"noise_sd", g.noise_sd}, {"p_treat", g.p_treat}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  g = GridSpec{};
  if (j.contains("b_values")) g.b_values = j.at("b_values").get<std::vector<double>>();
  if (j.contains("feature_sets")) {
    g.feature_sets.clear();
    for (const auto& f : j.at("feature_sets")) g.feature_sets.push_back(parse_feature_set(f.get<std::string>()));
  }
  if (j.contains("seeds")) g.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("modes")) {
    g.modes.clear();
    for (const auto& m : j.at("modes")) g.modes.push_back(parse_head_mode(m.get<std::string>()));
  }
  g.dataset_id = j.value("dataset_id", g.dataset_id);
  g.model_spec_id = j.value("model_spec_id", g.model_spec_id);
  g.noise_sd = j.value("noise_sd", g.noise_sd);
  g.p_treat = j.value("p_treat", g.p_treat);
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j = {{"run_key", r.run_key},
                      {"b_prog", r.b_prog},
                      {"b_pred", r.b_pred},
                      {"mode", to_string(r.mode)},
                      {"seed", r.seed},
                      {"feature_set", to_string(r.feature_set)},
                      {"t_pred", finite_or_null(r.model.t_pred)},
                      {"t_prog", finite_or_null(r.model.t_prog)},
                      {"ratio", finite_or_null(r.model.ratio)},
                      {"degenerate", r.model.degenerate},
                      {"bound_lower", finite_or_null(r.bound_lower)},
                      {"bound_upper", finite_or_null(r.bound_upper)},
                      {"status", r.status == RunStatus::done ? "done" : "failed"},
                      {"wall_time_s", r.wall_time_s}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.run_key = j.at("run_key").get<std::string>();
  r.b_prog = j.at("b_prog").get<double>();
  r.b_pred = j.at("b_pred").get<double>();
  r.mode = parse_head_mode(j.at("mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.feature_set = parse_feature_set(j.at("feature_set").get<std::string>());
  r.model.t_pred = number_or(j, "t_pred", kNaN);
  r.model.t_prog = number_or(j, "t_prog", kNaN);
  r.model.ratio = number_or(j, "ratio", kInf);
  r.model.degenerate = j.value("degenerate", false);
  r.bound_lower = number_or(j, "bound_lower", kInf);
  r.bound_upper = number_or(j, "bound_upper", kInf);
  const auto status = j.at("status").get<std::string>();
  if (status != "done" && status != "failed") {
    throw Error(Errc::io, "unknown run status '" + status + "'");
  }
  r.status = status == "done" ? RunStatus::done : RunStatus::failed;
  r.wall_time_s = j.value("wall_time_s", 0.0);
  r.error = j.value("error", std::string{});
  return r;
}

std::string run_key(const std::string& dataset_id, FeatureSet feature_set, double b_prog,
                    double b_pred, HeadMode mode, std::uint64_t seed,
                    const std::string& model_spec_id) {
  const std::string text = dataset_id + '|' + std::string(to_string(feature_set)) + '|' +
                           exact(b_prog) + '|' + exact(b_pred) + '|' +
                           std::string(to_string(mode)) + '|' + std::to_string(seed) + '|' +
                           model_spec_id;
  return hex64(mix_seed(hash_string(text), text.size()));
}

std::string model_spec_id(const ModelSpec& spec) {
  ModelSpec copy = spec;
  copy.mode = HeadMode::two_head;
  nlohmann::json j = copy;
  j.erase("mode");
  return hex64(hash_string(j.dump())).substr(0, 12);
}

std::vector<RunTask> expand_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<RunTask> tasks;
  tasks.reserve(spec.run_count());
  for (auto fs : spec.feature_sets)
    for (auto mode : spec.modes)
      for (auto seed : spec.seeds)
        for (double bp : spec.b_values)
          for (double bd : spec.b_values) {
            RunTask t;
            t.run_key = run_key(spec.dataset_id, fs, bp, bd, mode, seed, spec.model_spec_id);
            t.b_prog = bp;
            t.b_pred = bd;
            t.mode = mode;
            t.seed = seed;
            t.feature_set = fs;
            t.noise_sd = spec.noise_sd;
            t.p_treat = spec.p_treat;
            tasks.push_back(std::move(t));
          }
  return tasks;
}

ResultsStore::ResultsStore(std::filesystem::path path) : path_(std::move(path)) {}

void ResultsStore::append(const RunRecord& record) {
  const std::string line = to_json(record).dump() + '\n';
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot append to " + path_.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw Error(Errc::io, "write failed: " + path_.string());
}

std::vector<RunRecord> ResultsStore::load() const {
  std::vector<RunRecord> records;
  std::ifstream in(path_);
  if (!in) return records;
  std::map<std::string, std::size_t> position;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RunRecord r;
    try {
      r = record_from_json(nlohmann::json::parse(line));
    } catch (const std::exception&) {
      continue;  // torn write from an interrupted run
    }
    auto it = position.find(r.run_key);
    if (it == position.end()) {
      position.emplace(r.run_key, records.size());
      records.push_back(std::move(r));
    } else {
      records[it->second] = std::move(r);
    }
  }
  return records;
}

RunFunction make_pipeline_runner(const GridData& data, ModelSpec model, TrainConfig train_cfg) {
  data.manifest.validate();
  if (data.images.rank() != 4 || data.images.dim(0) != data.manifest.size()) {
    throw Error(Errc::shape_mismatch, "grid images " + shape_string(data.images.shape()) +
                                          " do not match " + std::to_string(data.manifest.size()) +
                                          " manifest rows");
  }
  auto manifest_b = std::make_shared<DatasetManifest>(data.manifest.swapped_roles());
  const Tensor* images = &data.images;
  const DatasetManifest* manifest_a = &data.manifest;
  return [=](const RunTask& task) {
    const DatasetManifest& manifest = task.feature_set == FeatureSet::a ? *manifest_a : *manifest_b;
    OutcomeSimConfig sim;
    sim.b_prog = task.b_prog;
    sim.b_pred = task.b_pred;
    sim.noise_sd = task.noise_sd;
    sim.p_treat = task.p_treat;
    sim.seed = task.seed;
    const auto rct = build_rct_dataset(manifest, sim);
    std::vector<int> T(rct.size());
    std::vector<double> Y(rct.size());
    for (std::size_t i = 0; i < rct.size(); ++i) {
      T[i] = rct[i].T;
      Y[i] = rct[i].Y;
    }
    const auto train_rows = manifest.indices(Split::train);
    const auto val_rows = manifest.indices(Split::val);
    const auto test_rows = manifest.indices(Split::test);
    if (test_rows.size() < 5) {
      throw Error(Errc::empty_dataset, "the test split needs at least 5 rows");
    }

    ModelSpec spec = model;
    spec.mode = task.mode;
    TrainConfig cfg = train_cfg;
    cfg.seed = task.seed;
    const TrainingSet set{*images, T, Y, train_rows, val_rows};
    const CateEstimator estimator = train(set, spec, cfg);

    const Tensor test_images = images->gather(test_rows);
    const auto candidate = task.mode == HeadMode::two_head
                               ? estimate_cate(estimator, test_images)
                               : baseline_candidate(estimator, test_images);
    std::vector<int> T_test;
    std::vector<double> Y_test, prog, pred;
    for (auto r : test_rows) {
      T_test.push_back(T[r]);
      Y_test.push_back(Y[r]);
      prog.push_back(manifest.rows[r].x_prog);
      pred.push_back(manifest.rows[r].x_pred);
    }
    RunOutcome out;
    out.model = predictive_strength(fit_interaction_ols(candidate, T_test, Y_test));
    out.bounds = compute_bounds(prog, pred, T_test, Y_test);
    return out;
  };
}

GridResult run_grid(const GridSpec& spec, const RunFunction& run, ResultsStore& store,
                    const GridOptions& options) {
  const auto tasks = expand_grid(spec);
  std::set<std::string> finished;
  for (const auto& r : store.load()) {
    if (r.status == RunStatus::done) finished.insert(r.run_key);
  }
  std::vector<const RunTask*> pending;
  GridResult result;
  for (const auto& t : tasks) {
    if (finished.count(t.run_key)) {
      ++result.skipped;
    } else {
      pending.push_back(&t);
    }
  }
  const std::size_t budget = std::min(pending.size(), options.max_runs.value_or(pending.size()));

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  std::mutex callback_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < budget; i = next++) {
      const RunTask& task = *pending[i];
      RunRecord rec;
      rec.run_key = task.run_key;
      rec.b_prog = task.b_prog;
      rec.b_pred = task.b_pred;
      rec.mode = task.mode;
      rec.seed = task.seed;
      rec.feature_set = task.feature_set;
      const auto start = std::chrono::steady_clock::now();
      try {
        const RunOutcome out = run(task);
        rec.model = out.model;
        rec.bound_lower = out.bounds.lower.ratio;
        rec.bound_upper = out.bounds.upper.ratio;
        rec.status = RunStatus::done;
      } catch (const std::exception& e) {
        rec.status = RunStatus::failed;
        rec.model = PredictiveStrength{kNaN, kNaN, kInf, true};
        rec.bound_lower = kInf;
        rec.bound_upper = kInf;
        rec.error = e.what();
        ++failed;
      }
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      store.append(rec);
      if (options.on_record) {
        std::lock_guard lock(callback_mutex);
        options.on_record(rec);
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, budget));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.executed = budget;
  result.failed = failed;

  std::set<std::string> keys;
  for (const auto& t : tasks) keys.insert(t.run_key);
  for (auto& r : store.load()) {
    if (keys.count(r.run_key)) result.records.push_back(std::move(r));
  }
  return result;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  if (sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> default_bin_edges(const std::vector<RunRecord>& records, std::size_t n_bins) {
  if (n_bins == 0) throw Error(Errc::invalid_argument, "default_bin_edges: n_bins must be >= 1");
  double lo = kInf, hi = 0.0;
  for (const auto& r : records) {
    if (r.b_prog == 0.0) continue;
    const double ratio = r.b_pred / r.b_prog;
    if (ratio > 0.0 && std::isfinite(ratio)) {
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (lo == hi) return {0.0, lo, 2.0 * lo};
  std::vector<double> edges{0.0};
  const double step = std::log(hi / lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    edges.push_back(i == n_bins ? hi : lo * std::exp(step * static_cast<double>(i)));
  }
  return edges;
}

namespace {

struct BinValues {
  std::vector<double> ratio, lower, upper;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

BinStats finish_bin(BinValues values, double lower, double upper) {
  BinStats s;
  s.lower = lower;
  s.upper = upper;
  s.count = values.ratio.size();
  if (s.count == 0) {
    s.median = s.q1 = s.q3 = s.min = s.max = kNaN;
    s.bound_lower_median = s.bound_upper_median = kNaN;
    return s;
  }
  auto& v = values.ratio;
  std::sort(v.begin(), v.end());
  s.median = quantile_sorted(v, 0.5);
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  s.min = v.front();
  s.max = v.back();
  s.bound_lower_median = median_of(std::move(values.lower));
  s.bound_upper_median = median_of(std::move(values.upper));
  return s;
}

}  // namespace

std::vector<BinnedSummary> aggregate_bins(const std::vector<RunRecord>& records,
                                          const std::vector<double>& edges) {
  if (records.empty()) throw Error(Errc::empty_dataset, "aggregate_bins: no records to aggregate");
  if (edges.size() < 2) throw Error(Errc::invalid_argument, "aggregate_bins: need at least two bin edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (std::isnan(edges[i]) || (i + 1 < edges.size() && !std::isfinite(edges[i]))) {
      throw Error(Errc::invalid_argument, "aggregate_bins: only the last edge may be infinite");
    }
    if (i > 0 && !(edges[i] > edges[i - 1])) {
      throw Error(Errc::invalid_argument, "aggregate_bins: edges must be strictly increasing");
    }
  }

  const std::size_t n_bins = edges.size() - 1;
  std::map<std::pair<FeatureSet, HeadMode>, std::pair<BinnedSummary, std::vector<BinValues>>> groups;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace({r.feature_set, r.mode});
    auto& [summary, values] = it->second;
    if (inserted) {
      summary.feature_set = r.feature_set;
      summary.mode = r.mode;
      summary.edges = edges;
      values.resize(n_bins + 1);  // last slot: infinite-ratio bin
    }
    ++summary.total;
    if (r.status == RunStatus::failed) {
      ++summary.failed;
      continue;
    }
    if (r.model.degenerate) {
      ++summary.degenerate;
      continue;
    }
    std::size_t slot = n_bins;
    if (r.b_prog != 0.0) {
      const double ratio = r.b_pred / r.b_prog;
      const auto pos = std::upper_bound(edges.begin(), edges.end(), ratio) - edges.begin();
      slot = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(pos - 1, 0, static_cast<std::ptrdiff_t>(n_bins) - 1));
    }
    values[slot].ratio.push_back(std::abs(r.model.ratio));
    values[slot].lower.push_back(r.bound_lower);
    values[slot].upper.push_back(r.bound_upper);
  }

  std::vector<BinnedSummary> out;
  for (auto& [key, entry] : groups) {
    auto& [summary, values] = entry;
    for (std::size_t b = 0; b < n_bins; ++b) {
      summary.bins.push_back(finish_bin(std::move(values[b]), edges[b], edges[b + 1]));
    }
    summary.infinite = finish_bin(std::move(values[n_bins]), kInf, kInf);
    out.push_back(std::move(summary));
  }
  return out;
}

std::vector<RunRecord> sorted_records(std::vector<RunRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& x, const RunRecord& y) {
    return std::tie(x.feature_set, x.mode, x.b_prog, x.b_pred, x.seed, x.run_key) <
           std::tie(y.feature_set, y.mode, y.b_prog, y.b_pred, y.seed, y.run_key);
  });
  return records;
}

}  // namespace predbio
