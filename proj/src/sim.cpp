#include "predbio/sim.hpp"

#include <cmath>
#include <fstream>

#include "predbio/csv.hpp"
#include "predbio/error.hpp"
#include "predbio/rng.hpp"

namespace predbio {

namespace {

constexpr std::string_view kTreatmentStream = "treatment";
constexpr std::string_view kNoiseStream = "noise";

double outcome(double x_prog, double x_pred, int t, const OutcomeSimConfig& c, double eps) {
  // No intercept and no constant treatment effect.
  return c.b_prog * x_prog + c.b_pred * x_pred * t + eps;
}

double noise_for(const OutcomeSimConfig& c, std::string_view id) {
  if (c.noise_sd == 0.0) return 0.0;
  return c.noise_sd * Rng::stream(c.seed, id, kNoiseStream).normal();
}

int treatment_for(const OutcomeSimConfig& c, std::string_view id) {
  return Rng::stream(c.seed, id, kTreatmentStream).bernoulli(c.p_treat) ? 1 : 0;
}

}  // namespace

void OutcomeSimConfig::validate() const {
  auto check = [](bool ok, const char* msg) {
    if (!ok) throw Error(Errc::invalid_argument, msg);
  };
  check(std::isfinite(b_prog) && b_prog >= 0.0, "b_prog must be finite and >= 0");
  check(std::isfinite(b_pred) && b_pred >= 0.0, "b_pred must be finite and >= 0");
  check(std::isfinite(noise_sd) && noise_sd >= 0.0, "noise_sd must be finite and >= 0");
  check(p_treat >= 0.0 && p_treat <= 1.0, "p_treat must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const OutcomeSimConfig& c) {
  j = {{"b_prog", c.b_prog}, {"b_pred", c.b_pred}, {"noise_sd", c.noise_sd},
       {"p_treat", c.p_treat}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, OutcomeSimConfig& c) {
  c.b_prog = j.value("b_prog", c.b_prog);
  c.b_pred = j.value("b_pred", c.b_pred);
  c.noise_sd = j.value("noise_sd", c.noise_sd);
  c.p_treat = j.value("p_treat", c.p_treat);
  c.seed = j.value("seed", c.seed);
}

std::vector<int> assign_treatment(std::size_t n, double p_treat, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::empty_dataset, "assign_treatment: n must be >= 1");
  OutcomeSimConfig c;
  c.p_treat = p_treat;
  c.seed = seed;
  c.validate();
  std::vector<int> arms(n);
  for (std::size_t i = 0; i < n; ++i) arms[i] = treatment_for(c, std::to_string(i));
  return arms;
}

std::vector<double> simulate_outcomes(std::span<const BiomarkerRow> rows,
                                      const OutcomeSimConfig& config) {
  config.validate();
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!std::isfinite(r.x_prog) || !std::isfinite(r.x_pred)) {
      throw Error(Errc::non_finite, "simulate_outcomes: non-finite biomarker in row " +
                                        std::to_string(i));
    }
    if (r.T != 0 && r.T != 1) {
      throw Error(Errc::invalid_argument, "simulate_outcomes: T must be 0 or 1");
    }
    y[i] = outcome(r.x_prog, r.x_pred, r.T, config, noise_for(config, std::to_string(i)));
  }
  return y;
}

std::vector<RCTRecord> build_rct_dataset(const DatasetManifest& manifest,
                                         const OutcomeSimConfig& config) {
  config.validate();
  if (manifest.empty()) throw Error(Errc::empty_dataset, "build_rct_dataset: empty manifest");
  manifest.validate();
  std::vector<RCTRecord> records;
  records.reserve(manifest.size());
  for (const auto& row : manifest.rows) {
    RCTRecord r;
    r.sample_id = row.sample_id;
    r.x_prog = row.x_prog;
    r.x_pred = row.x_pred;
    r.T = treatment_for(config, row.sample_id);
    r.Y = outcome(r.x_prog, r.x_pred, r.T, config, noise_for(config, row.sample_id));
    records.push_back(std::move(r));
  }
  return records;
}

void write_rct_csv(std::span<const RCTRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "sample_id,x_prog,x_pred,T,Y\n";
  for (const auto& r : records) {
    out << csv_escape(r.sample_id) << ',' << format_double(r.x_prog) << ','
        << format_double(r.x_pred) << ',' << r.T << ',' << format_double(r.Y) << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

std::vector<RCTRecord> read_rct_csv(const std::filesystem::path& path) {
  const auto table = CsvTable::read(path);
  const auto c_id = table.column("sample_id");
  const auto c_prog = table.column("x_prog");
  const auto c_pred = table.column("x_pred");
  const auto c_t = table.column("T");
  const auto c_y = table.column("Y");
  std::vector<RCTRecord> records;
  records.reserve(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    auto number = [&](std::size_t col) {
      auto v = parse_double(table.at(i, col));
      if (!v) {
        throw Error(Errc::non_numeric, path.string() + ": non-numeric '" + table.at(i, col) +
                                           "' in column " + table.header()[col]);
      }
      return *v;
    };
    RCTRecord r;
    r.sample_id = table.at(i, c_id);
    r.x_prog = number(c_prog);
    r.x_pred = number(c_pred);
    const double t = number(c_t);
    if (t != 0.0 && t != 1.0) throw Error(Errc::invalid_argument, "T must be 0 or 1");
    r.T = static_cast<int>(t);
    r.Y = number(c_y);
    records.push_back(std::move(r));
  }
  return records;
}

void write_rct_jsonl(std::span<const RCTRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json j = {{"sample_id", r.sample_id}, {"x_prog", r.x_prog},
                        {"x_pred", r.x_pred},       {"T", r.T},
                        {"Y", r.Y}};
    out << j.dump() << '\n';
  }
}

}  // namespace predbio
