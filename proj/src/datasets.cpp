#include "predbio/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "predbio/csv.hpp"
#include "predbio/error.hpp"
#include "predbio/image_io.hpp"
#include "predbio/rng.hpp"

namespace predbio {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw Error(Errc::invalid_argument, "unknown split '" + std::string(text) + "'");
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].split == split) out.push_back(i);
  return out;
}

std::filesystem::path DatasetManifest::resolve_image(const ManifestRow& row) const {
  std::filesystem::path p(row.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

void DatasetManifest::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.sample_id).second) {
      throw Error(Errc::duplicate_id, "duplicate sample_id '" + r.sample_id + "'");
    }
    if (!std::isfinite(r.x_prog) || !std::isfinite(r.x_pred)) {
      throw Error(Errc::non_finite, "non-finite biomarker for sample '" + r.sample_id + "'");
    }
  }
}

DatasetManifest DatasetManifest::swapped_roles() const {
  DatasetManifest out = *this;
  for (auto& r : out.rows) std::swap(r.x_prog, r.x_pred);
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "sample_id,image_path,x_prog,x_pred,split\n";
  for (const auto& r : manifest.rows) {
    out << csv_escape(r.sample_id) << ',' << csv_escape(r.image_path) << ','
        << format_double(r.x_prog) << ',' << format_double(r.x_pred) << ','
        << to_string(r.split) << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

namespace {

double numeric_cell(const CsvTable& table, std::size_t row, std::size_t col) {
  auto v = parse_double(table.at(row, col));
  if (!v || !std::isfinite(*v)) {
    throw Error(Errc::non_numeric, table.origin() + ": non-numeric value '" +
                                       table.at(row, col) + "' in column '" +
                                       table.header()[col] + "' (row " +
                                       std::to_string(row + 1) + ")");
  }
  return *v;
}

void check_images(const DatasetManifest& m) {
  for (const auto& r : m.rows) {
    const auto p = m.resolve_image(r);
    if (!std::filesystem::exists(p)) {
      throw Error(Errc::io, "image for sample '" + r.sample_id + "' not found: " + p.string());
    }
  }
}

bool is_binary(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0 || x == 1.0; });
}

void normalize_column(std::vector<double>& values, std::span<const Split> splits,
                      const std::string& name) {
  if (is_binary(values)) {
    if (std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) ==
        values.end()) {
      throw Error(Errc::zero_range, "feature column '" + name + "' is constant");
    }
    return;
  }
  double lo = INFINITY;
  double hi = -INFINITY;
  bool any_train = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (splits[i] != Split::train) continue;
    any_train = true;
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  if (!any_train) throw Error(Errc::empty_dataset, "no train rows to normalise '" + name + "'");
  if (!(hi > lo)) {
    throw Error(Errc::zero_range, "feature column '" + name + "' has zero range on train split");
  }
  for (auto& v : values) v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path, bool require_images) {
  const auto table = CsvTable::read(path);
  const auto c_id = table.column("sample_id");
  const auto c_img = table.column("image_path");
  const auto c_prog = table.column("x_prog");
  const auto c_pred = table.column("x_pred");
  const auto c_split = table.column("split");
  DatasetManifest m;
  m.base_dir = path.parent_path();
  for (std::size_t i = 0; i < table.rows(); ++i) {
    m.rows.push_back({table.at(i, c_id), table.at(i, c_img), numeric_cell(table, i, c_prog),
                      numeric_cell(table, i, c_pred), parse_split(table.at(i, c_split))});
  }
  if (m.empty()) throw Error(Errc::empty_dataset, path.string() + ": manifest has no rows");
  m.validate();
  if (require_images) check_images(m);
  return m;
}

void ColoredDigitSpec::validate() const {
  if (!(color_probability >= 0.0 && color_probability <= 1.0)) {
    throw Error(Errc::invalid_argument, "color_probability must lie in [0, 1]");
  }
  for (int d : circle_digit_set) {
    if (d < 0 || d > 9) throw Error(Errc::unknown_digit, "circle digit out of range");
  }
  if (image_size < 8) throw Error(Errc::invalid_argument, "image_size must be >= 8");
}

void to_json(nlohmann::json& j, const ColoredDigitSpec& s) {
  j = {{"color_probability", s.color_probability},
       {"circle_digit_set", s.circle_digit_set},
       {"prognostic", s.prognostic == ColoredFeature::color ? "color" : "circle"},
       {"image_size", s.image_size}};
}

void from_json(const nlohmann::json& j, ColoredDigitSpec& s) {
  s.color_probability = j.value("color_probability", s.color_probability);
  if (j.contains("circle_digit_set")) {
    s.circle_digit_set = j.at("circle_digit_set").get<std::set<int>>();
  }
  if (j.contains("prognostic")) {
    const auto p = j.at("prognostic").get<std::string>();
    if (p == "color") {
      s.prognostic = ColoredFeature::color;
    } else if (p == "circle") {
      s.prognostic = ColoredFeature::circle;
    } else {
      throw Error(Errc::config, "prognostic must be 'color' or 'circle'");
    }
  }
  s.image_size = j.value("image_size", s.image_size);
}

ColoredDigits render_colored_digits(const DigitImages& source, const ColoredDigitSpec& spec,
                                    std::uint64_t seed) {
  spec.validate();
  const std::size_t n = source.size();
  if (n == 0) throw Error(Errc::empty_dataset, "render_colored_digits: no source digits");
  const auto& src_shape = source.images.shape();
  if (src_shape.size() != 4 || src_shape[1] != 1 || src_shape[2] != spec.image_size ||
      src_shape[3] != spec.image_size) {
    throw Error(Errc::shape_mismatch, "source digits must be (N, 1, " +
                                          std::to_string(spec.image_size) + ", " +
                                          std::to_string(spec.image_size) + ")");
  }
  const std::size_t plane = spec.image_size * spec.image_size;
  ColoredDigits out;
  out.images = Tensor({n, 3, spec.image_size, spec.image_size});
  out.sample_ids.resize(n);
  out.digits = source.labels;
  out.x_color.resize(n);
  out.x_circle.resize(n);
  out.manifest.rows.resize(n);
  char id[32];
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = source.labels[i];
    if (digit < 0 || digit > 9) {
      throw Error(Errc::unknown_digit, "unknown digit class " + std::to_string(digit));
    }
    std::snprintf(id, sizeof(id), "cmnist_%06zu", i);
    out.sample_ids[i] = id;
    const bool green = Rng::stream(seed, id, "color").bernoulli(spec.color_probability);
    out.x_color[i] = green ? 1.0 : 0.0;
    out.x_circle[i] = spec.circle_digit_set.contains(digit) ? 1.0 : 0.0;

    // Digits on black; green uses the G channel, non-green uses R.
    auto gray = source.images.sample(i);
    auto rgb = out.images.sample(i);
    const std::size_t channel = green ? 1 : 0;
    std::copy(gray.begin(), gray.end(), rgb.begin() + static_cast<std::ptrdiff_t>(channel * plane));

    auto& row = out.manifest.rows[i];
    row.sample_id = id;
    const bool color_is_prog = spec.prognostic == ColoredFeature::color;
    row.x_prog = color_is_prog ? out.x_color[i] : out.x_circle[i];
    row.x_pred = color_is_prog ? out.x_circle[i] : out.x_color[i];
  }
  return out;
}

ColoredDigits generate_colored_digits(const DigitImages& source, const ColoredDigitSpec& spec,
                                      std::uint64_t seed, const std::filesystem::path& root,
                                      std::span<const double> split_fractions) {
  ColoredDigits out = render_colored_digits(source, spec, seed);
  out.manifest = split_dataset(out.manifest, split_fractions, seed);
  out.manifest.base_dir = root;
  const std::size_t size = spec.image_size;
  for (auto s : {Split::train, Split::val, Split::test}) {
    std::filesystem::create_directories(root / std::string(to_string(s)));
  }
  std::ofstream ann(root / "annotations.csv", std::ios::binary);
  if (!ann) throw Error(Errc::io, "cannot write " + (root / "annotations.csv").string());
  ann << "sample_id,image_path,digit,color,circle,split\n";
  for (std::size_t i = 0; i < out.manifest.size(); ++i) {
    auto& row = out.manifest.rows[i];
    row.image_path = std::string(to_string(row.split)) + "/" + row.sample_id + ".png";
    write_png(root / row.image_path, tensor_to_image(out.images.sample(i), 3, size, size));
    ann << row.sample_id << ',' << row.image_path << ',' << out.digits[i] << ','
        << out.x_color[i] << ',' << out.x_circle[i] << ',' << to_string(row.split) << '\n';
  }
  write_manifest(out.manifest, root / "manifest.csv");
  return out;
}

DatasetManifest load_annotation_table(const std::filesystem::path& path,
                                      const std::string& prog_column,
                                      const std::string& pred_column, bool normalize,
                                      bool require_images) {
  const auto table = CsvTable::read(path);
  const auto c_id = table.column("sample_id");
  const auto c_img = table.column("image_path");
  const auto c_prog = table.column(prog_column);
  const auto c_pred = table.column(pred_column);
  const bool has_split = table.has_column("split");
  if (table.rows() == 0) throw Error(Errc::empty_dataset, path.string() + ": no rows");

  const std::size_t n = table.rows();
  std::vector<double> prog(n), pred(n);
  std::vector<Split> splits(n, Split::train);
  for (std::size_t i = 0; i < n; ++i) {
    prog[i] = numeric_cell(table, i, c_prog);
    pred[i] = numeric_cell(table, i, c_pred);
    if (has_split) splits[i] = parse_split(table.at(i, table.column("split")));
  }
  if (normalize) {
    normalize_column(prog, splits, prog_column);
    normalize_column(pred, splits, pred_column);
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  for (std::size_t i = 0; i < n; ++i) {
    m.rows.push_back({table.at(i, c_id), table.at(i, c_img), prog[i], pred[i], splits[i]});
  }
  m.validate();
  if (require_images) check_images(m);
  return m;
}

DatasetManifest split_dataset(const DatasetManifest& manifest,
                              std::span<const double> fractions, std::uint64_t seed) {
  if (manifest.empty()) throw Error(Errc::empty_dataset, "split_dataset: empty manifest");
  if (fractions.empty() || fractions.size() > 3) {
    throw Error(Errc::invalid_argument, "split_dataset: expected 1 to 3 fractions");
  }
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error(Errc::invalid_argument, "split fractions must lie in (0, 1]");
    }
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(Errc::invalid_argument, "split fractions must sum to 1");
  }

  const std::size_t n = manifest.size();
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    // Guard against 0.8 * 100 = 79.99999... style truncation.
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[k];
    remainders.emplace_back(exact - static_cast<double>(counts[k]), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, hash_string("split")));
  rng.shuffle(order.begin(), order.end());

  constexpr Split kSplits[] = {Split::train, Split::val, Split::test};
  DatasetManifest out = manifest;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t c = 0; c < counts[k]; ++c) out.rows[order[pos++]].split = kSplits[k];
  }
  return out;
}

Tensor load_images(const DatasetManifest& manifest) {
  if (manifest.empty()) throw Error(Errc::empty_dataset, "load_images: empty manifest");
  Tensor images;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto img = read_png(manifest.resolve_image(manifest.rows[i]));
    if (i == 0) {
      images = Tensor({manifest.size(), img.channels, img.height, img.width});
    } else if (img.channels != images.dim(1) || img.height != images.dim(2) ||
               img.width != images.dim(3)) {
      throw Error(Errc::shape_mismatch,
                  "image shape differs for sample '" + manifest.rows[i].sample_id + "'");
    }
    const auto t = image_to_tensor(img);
    std::copy(t.values().begin(), t.values().end(), images.sample(i).begin());
  }
  return images;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(Errc::invalid_argument, "pearson_correlation: need equal lengths >= 2");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace predbio
