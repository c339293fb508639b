#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "predbio/csv.hpp"
#include "predbio/error.hpp"
#include "predbio/experiment.hpp"

namespace predbio {

namespace {

constexpr int kDigits = 10;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  return out;
}

void write_bin_row(std::ostream& out, const BinnedSummary& s, const std::string& label,
                   const BinStats& b) {
  out << to_string(s.feature_set) << ',' << to_string(s.mode) << ',' << label << ','
      << format_fixed(b.lower, kDigits) << ',' << format_fixed(b.upper, kDigits) << ','
      << format_fixed(b.width(), kDigits) << ',' << b.count << ','
      << format_fixed(b.median, kDigits) << ',' << format_fixed(b.q1, kDigits) << ','
      << format_fixed(b.q3, kDigits) << ',' << format_fixed(b.min, kDigits) << ','
      << format_fixed(b.max, kDigits) << ',' << format_fixed(b.bound_lower_median, kDigits)
      << ',' << format_fixed(b.bound_upper_median, kDigits) << ',' << (b.empty() ? 1 : 0) << ','
      << s.degenerate << ',' << s.failed << ',' << s.total << '\n';
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

const char* mode_colour(HeadMode m) { return m == HeadMode::two_head ? "#1f77b4" : "#ff7f0e"; }

// Log-scale boxplot of one feature set: x is the bin of b_pred/b_prog, y the t-ratio.
void write_figure(const std::vector<const BinnedSummary*>& group, const std::filesystem::path& path) {
  const auto& edges = group.front()->edges;
  const std::size_t n_bins = edges.size() - 1;

  // x layout: finite bins on a log axis, then one slot for the infinite-ratio bin.
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = 0.0;
  for (double e : edges) {
    if (e > 0.0 && std::isfinite(e)) {
      x_lo = std::min(x_lo, e);
      x_hi = std::max(x_hi, e);
    }
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0.1;
    x_hi = 1.0;
  }
  if (x_hi <= x_lo) x_hi = x_lo * 10.0;
  const double x_floor = x_lo / std::pow(x_hi / x_lo, 1.0 / std::max<double>(1.0, n_bins - 1.0));
  const double x_ceil = std::isfinite(edges.back()) ? x_hi : x_hi * (x_hi / x_floor > 1 ? std::sqrt(x_hi / x_floor) : 2.0);
  auto clamp_x = [&](double v) { return std::clamp(v, x_floor, x_ceil); };

  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = 0.0;
  auto see = [&](double v) {
    if (v > 0.0 && std::isfinite(v)) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  };
  for (const auto* s : group) {
    for (const auto* b : {&s->infinite}) {
      see(b->min), see(b->max), see(b->bound_lower_median), see(b->bound_upper_median);
    }
    for (const auto& b : s->bins) {
      see(b.min), see(b.max), see(b.bound_lower_median), see(b.bound_upper_median);
    }
  }
  if (!std::isfinite(y_lo)) {
    y_lo = 0.1;
    y_hi = 10.0;
  }
  y_lo = std::pow(10.0, std::floor(std::log10(y_lo)));
  y_hi = std::pow(10.0, std::ceil(std::log10(y_hi)));
  if (y_hi <= y_lo) y_hi = y_lo * 10.0;

  const double left = 70, top = 40, plot_w = 560, inf_w = 80, plot_h = 360;
  const double width = left + plot_w + inf_w + 160, height = top + plot_h + 60;
  auto X = [&](double v) {
    return left + plot_w * std::log(clamp_x(v) / x_floor) / std::log(x_ceil / x_floor);
  };
  const double inf_x = left + plot_w + inf_w / 2;
  auto Y = [&](double v) {
    const double c = std::clamp(v, y_lo, y_hi);
    return top + plot_h * (1.0 - std::log(c / y_lo) / std::log(y_hi / y_lo));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">feature set "
      << to_string(group.front()->feature_set) << ": |t_pred/t_prog| by b_pred/b_prog bin</text>\n";
  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w + inf_w)
      << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = y_lo; d <= y_hi * 1.0001; d *= 10.0) {
    svg << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w + inf_w) << "\" y1=\""
        << num(Y(d)) << "\" y2=\"" << num(Y(d)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(Y(d) + 4)
        << "\" text-anchor=\"end\">" << tick_label(d) << "</text>\n";
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!std::isfinite(edges[i])) continue;
    const double x = i == 0 && edges[i] <= 0.0 ? left : X(edges[i]);
    svg << "<line x1=\"" << num(x) << "\" x2=\"" << num(x) << "\" y1=\"" << num(top + plot_h)
        << "\" y2=\"" << num(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << num(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << tick_label(edges[i]) << "</text>\n";
  }
  svg << "<line x1=\"" << num(left + plot_w) << "\" x2=\"" << num(left + plot_w) << "\" y1=\""
      << num(top) << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
  svg << "<text x=\"" << num(inf_x) << "\" y=\"" << num(top + plot_h + 18)
      << "\" text-anchor=\"middle\">b_prog = 0</text>\n";
  svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(top + plot_h + 40)
      << "\" text-anchor=\"middle\">b_pred / b_prog (log scale)</text>\n";

  const double box_w = 12;
  for (std::size_t m = 0; m < group.size(); ++m) {
    const auto& s = *group[m];
    const double offset = (static_cast<double>(m) - (group.size() - 1) / 2.0) * (box_w + 4);
    auto draw = [&](const BinStats& b, double cx, double x0, double x1) {
      if (b.empty()) return;
      const char* c = mode_colour(s.mode);
      cx += offset;
      svg << "<line x1=\"" << num(x0) << "\" x2=\"" << num(x1) << "\" y1=\"" << num(Y(b.median))
          << "\" y2=\"" << num(Y(b.median)) << "\" stroke=\"" << c << "\" stroke-opacity=\"0.5\"/>\n";
      svg << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(Y(b.max))
          << "\" y2=\"" << num(Y(b.min)) << "\" stroke=\"" << c << "\"/>\n";
      svg << "<rect x=\"" << num(cx - box_w / 2) << "\" y=\"" << num(Y(b.q3)) << "\" width=\""
          << num(box_w) << "\" height=\"" << num(std::max(1.0, Y(b.q1) - Y(b.q3)))
          << "\" fill=\"" << c << "\" fill-opacity=\"0.3\" stroke=\"" << c << "\"/>\n";
      svg << "<line x1=\"" << num(cx - box_w / 2) << "\" x2=\"" << num(cx + box_w / 2)
          << "\" y1=\"" << num(Y(b.median)) << "\" y2=\"" << num(Y(b.median)) << "\" stroke=\""
          << c << "\" stroke-width=\"2\"/>\n";
    };
    for (const auto& b : s.bins) {
      const double x0 = b.lower <= 0.0 ? left : X(b.lower);
      const double x1 = std::isfinite(b.upper) ? X(b.upper) : left + plot_w;
      draw(b, (x0 + x1) / 2, x0, x1);
    }
    draw(s.infinite, inf_x, left + plot_w, left + plot_w + inf_w);
  }

  // Bound reference lines (taken from the first mode; bounds do not depend on the model).
  const auto& ref = *group.front();
  for (const auto& [field, colour, label] :
       {std::tuple{&BinStats::bound_upper_median, "#2ca02c", "upper bound"},
        std::tuple{&BinStats::bound_lower_median, "#d62728", "lower bound"}}) {
    std::string points;
    for (const auto& b : ref.bins) {
      if (b.empty() || !std::isfinite(b.*field)) continue;
      const double x0 = b.lower <= 0.0 ? left : X(b.lower);
      const double x1 = std::isfinite(b.upper) ? X(b.upper) : left + plot_w;
      points += num(x0) + "," + num(Y(b.*field)) + " " + num(x1) + "," + num(Y(b.*field)) + " ";
    }
    if (!points.empty()) {
      svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << colour
          << "\" stroke-dasharray=\"6,3\"><title>" << label << "</title></polyline>\n";
    }
  }

  double ly = top + 10;
  auto legend = [&](const char* colour, const std::string& text, bool dashed) {
    const double lx = left + plot_w + inf_w + 15;
    svg << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 20) << "\" y1=\"" << num(ly)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\""
        << (dashed ? " stroke-dasharray=\"6,3\"" : "") << "/>\n";
    svg << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4) << "\">" << text << "</text>\n";
    ly += 18;
  };
  for (const auto* s : group) legend(mode_colour(s->mode), std::string(to_string(s->mode)), false);
  legend("#2ca02c", "upper bound", true);
  legend("#d62728", "lower bound", true);
  svg << "</svg>\n";

  auto out = open_output(path);
  out << svg.str();
}

}  // namespace

ReportFiles emit_report(const std::vector<BinnedSummary>& summaries,
                        const std::vector<RunRecord>& records,
                        const std::filesystem::path& out_dir) {
  if (records.empty()) throw Error(Errc::empty_dataset, "emit_report: no run records to report");
  if (summaries.empty()) throw Error(Errc::empty_dataset, "emit_report: no binned summaries to report");
  std::filesystem::create_directories(out_dir);

  ReportFiles files;
  files.records = out_dir / "records.jsonl";
  {
    auto out = open_output(files.records);
    for (const auto& r : sorted_records(records)) out << to_json(r).dump() << '\n';
  }

  files.binned_csv = out_dir / "binned.csv";
  {
    auto out = open_output(files.binned_csv);
    out << "feature_set,mode,bin,lower,upper,width,count,median,q1,q3,min,max,"
           "bound_lower_median,bound_upper_median,empty,degenerate,failed,total\n";
    for (const auto& s : summaries) {
      for (std::size_t b = 0; b < s.bins.size(); ++b) write_bin_row(out, s, std::to_string(b), s.bins[b]);
      write_bin_row(out, s, "inf", s.infinite);
    }
    if (!out) throw Error(Errc::io, "write failed: " + files.binned_csv.string());
  }

  for (auto fs : {FeatureSet::a, FeatureSet::b}) {
    std::vector<const BinnedSummary*> group;
    for (const auto& s : summaries) {
      if (s.feature_set == fs) group.push_back(&s);
    }
    if (group.empty()) continue;
    const auto path = out_dir / ("boxplot_" + std::string(to_string(fs)) + ".svg");
    write_figure(group, path);
    files.figures.push_back(path);
  }
  return files;
}

}  // namespace predbio
