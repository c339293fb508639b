#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "predbio/manifest.hpp"
#include <json.hpp>

namespace predbio {

/// Knobs of the linear outcome model Y = b_prog*x_prog + b_pred*x_pred*T + noise.
struct OutcomeSimConfig {
  double b_prog = 1.0;
  double b_pred = 1.0;
  double noise_sd = 0.0;
  double p_treat = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const OutcomeSimConfig& c);
void from_json(const nlohmann::json& j, OutcomeSimConfig& c);

struct RCTRecord {
  std::string sample_id;
  double x_prog = 0.0;
  double x_pred = 0.0;
  int T = 0;
  double Y = 0.0;

  bool operator==(const RCTRecord&) const = default;
};

struct BiomarkerRow {
  double x_prog = 0.0;
  double x_pred = 0.0;
  int T = 0;
};

/// Bernoulli(p_treat) arm per index; index i draws from the stream of id "i".
std::vector<int> assign_treatment(std::size_t n, double p_treat, std::uint64_t seed);

/// Noise for row i (when noise_sd > 0) comes from the stream of id "i".
std::vector<double> simulate_outcomes(std::span<const BiomarkerRow> rows,
                                      const OutcomeSimConfig& config);

/// Treatment and noise are drawn from streams keyed by (seed, sample_id), so a
/// record's (T, Y) does not depend on which other samples are present.
std::vector<RCTRecord> build_rct_dataset(const DatasetManifest& manifest,
                                         const OutcomeSimConfig& config);

void write_rct_csv(std::span<const RCTRecord> records, const std::filesystem::path& path);
std::vector<RCTRecord> read_rct_csv(const std::filesystem::path& path);
void write_rct_jsonl(std::span<const RCTRecord> records, const std::filesystem::path& path);

}  // namespace predbio
