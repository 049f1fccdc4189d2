#pragma once

// Static SVG figures: matrix heatmaps, dendrograms with a threshold cut,
// and divergence panels. Output is a pure function of the inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "lidd/clustering.hpp"
#include "lidd/divergence.hpp"
#include "lidd/serialize.hpp"
#include "lidd/similarity.hpp"

namespace lidd {

enum class Colormap { diverging, sequential };

struct RenderSpec {
  int width_px = 900;
  int height_px = 800;
  std::optional<Colormap> colormap;  // unset: per-figure default
  int label_font_px = 11;
  std::optional<std::pair<double, double>> value_range;

  void validate() const {
    if (width_px <= 0 || height_px <= 0) throw ConfigError("render", "width and height must be positive");
    if (label_font_px <= 0) throw ConfigError("render", "label font size must be positive");
    if (value_range && !(value_range->first < value_range->second))
      throw ConfigError("render", "value_range requires min < max");
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  std::string hex() const { return fmt::format("#{:02x}{:02x}{:02x}", r, g, b); }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

namespace detail {

// Five evenly spaced anchors per map.
inline constexpr std::array<Rgb, 5> kSequentialStops{
    {{0x44, 0x01, 0x54}, {0x3b, 0x52, 0x8b}, {0x21, 0x91, 0x8c}, {0x5e, 0xc9, 0x62}, {0xfd, 0xe7, 0x25}}};
inline constexpr std::array<Rgb, 5> kDivergingStops{
    {{0x21, 0x66, 0xac}, {0x67, 0xa9, 0xcf}, {0xf7, 0xf7, 0xf7}, {0xef, 0x8a, 0x62}, {0xb2, 0x18, 0x2b}}};

inline constexpr std::array<std::string_view, 10> kClusterPalette{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline constexpr std::string_view kNeutralLink = "#555555";
inline constexpr std::string_view kFlagOn = "#d62728";
inline constexpr std::string_view kFlagOff = "#f2f2f2";

inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) { return fmt::format("{:.2f}", v); }
inline std::string tick(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  return fmt::format("{:.3g}", v);
}

inline const std::array<Rgb, 5>& stops(Colormap c) {
  return c == Colormap::diverging ? kDivergingStops : kSequentialStops;
}

class SvgDoc {
 public:
  SvgDoc(int w, int h, int font) {
    body_ += fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"{2}\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
        w, h, font);
  }
  void raw(std::string_view s) { body_ += s; }
  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {}) {
    body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"{}{}/>\n", num(x), num(y), num(w),
                         num(h), fill, extra.empty() ? "" : " ", extra);
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, std::string_view extra = {}) {
    body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\"{}{}/>\n", num(x1), num(y1),
                         num(x2), num(y2), stroke, extra.empty() ? "" : " ", extra);
  }
  void text(double x, double y, std::string_view s, std::string_view attrs = {}) {
    body_ += fmt::format("<text x=\"{}\" y=\"{}\"{}{}>{}</text>\n", num(x), num(y), attrs.empty() ? "" : " ", attrs,
                         xml_escape(s));
  }
  std::string finish() && {
    body_ += "</svg>\n";
    return std::move(body_);
  }

 private:
  std::string body_;
};

inline double label_width(const std::vector<std::string>& labels, int font) {
  std::size_t longest = 0;
  for (const auto& l : labels) longest = std::max(longest, l.size());
  return static_cast<double>(longest) * font * 0.62 + 8.0;
}

}  // namespace detail

/// Color of `value` on a colormap spanning [lo, hi]; values outside clamp.
inline Rgb colormap_color(double value, double lo, double hi, Colormap cmap) {
  const auto& s = detail::stops(cmap);
  double u = (value - lo) / (hi - lo);
  if (!(u >= 0.0)) u = 0.0;
  if (u > 1.0) u = 1.0;
  const double pos = u * static_cast<double>(s.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), s.size() - 2);
  const double f = pos - static_cast<double>(k);
  auto mix = [f](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround(static_cast<double>(a) + (static_cast<double>(b) - a) * f));
  };
  return {mix(s[k].r, s[k + 1].r), mix(s[k].g, s[k + 1].g), mix(s[k].b, s[k + 1].b)};
}

/// All-equal ranges widen to [v, v + 1].
inline std::pair<double, double> widen_degenerate(double lo, double hi) {
  if (!(lo < hi)) return {lo, lo + 1.0};
  return {lo, hi};
}

/// Rectangular labelled grid; the common shape of every heatmap figure.
struct HeatmapGrid {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix<double> values;
  BoolMatrix valid;
};

inline std::string render_grid(const HeatmapGrid& g, const RenderSpec& spec, std::pair<double, double> range,
                               Colormap cmap) {
  spec.validate();
  const int font = spec.label_font_px;
  const double title_h = font * 2.5;
  const double left = 10.0 + detail::label_width(g.row_labels, font);
  const double top = title_h + detail::label_width(g.col_labels, font);
  const double bar_w = 18.0, bar_area = 30.0 + bar_w + font * 4.0;
  const std::size_t rows = g.values.rows(), cols = g.values.cols();
  const double avail_w = std::max(10.0, spec.width_px - left - bar_area - 10.0);
  const double avail_h = std::max(10.0, spec.height_px - top - 10.0);
  // Square cells keep symmetric matrices visually symmetric.
  const double cell = std::min(avail_w / static_cast<double>(std::max<std::size_t>(cols, 1)),
                               avail_h / static_cast<double>(std::max<std::size_t>(rows, 1)));

  detail::SvgDoc doc(spec.width_px, spec.height_px, font);
  const auto& st = detail::stops(cmap);
  std::string defs =
      "<defs>\n<pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\">"
      "<rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>"
      "<path d=\"M0,6 L6,0\" stroke=\"#999999\" stroke-width=\"1\"/></pattern>\n"
      "<linearGradient id=\"colorbar\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
  for (std::size_t k = 0; k < st.size(); ++k)
    defs += fmt::format("<stop offset=\"{}\" stop-color=\"{}\"/>\n", detail::num(static_cast<double>(k) / 4.0),
                        st[k].hex());
  defs += "</linearGradient>\n</defs>\n";
  doc.raw(defs);
  doc.text(spec.width_px / 2.0, font * 1.6, g.title, "text-anchor=\"middle\" font-weight=\"bold\"");

  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const bool ok = g.valid.empty() || g.valid(i, j);
      const std::string fill =
          ok ? colormap_color(g.values(i, j), range.first, range.second, cmap).hex() : std::string("url(#hatch)");
      doc.rect(left + j * cell, top + i * cell, cell, cell, fill,
               fmt::format("data-row=\"{}\" data-col=\"{}\"", i, j));
    }
  for (std::size_t i = 0; i < rows; ++i)
    doc.text(left - 4.0, top + (i + 0.5) * cell + font * 0.35, g.row_labels[i], "text-anchor=\"end\"");
  for (std::size_t j = 0; j < cols; ++j) {
    const double x = left + (j + 0.5) * cell + font * 0.35;
    const double y = top - 4.0;
    doc.text(x, y, g.col_labels[j],
             fmt::format("text-anchor=\"start\" transform=\"rotate(-90 {} {})\"", detail::num(x), detail::num(y)));
  }

  const double bar_x = left + cols * cell + 30.0;
  const double bar_top = top;
  const double bar_h = std::max(cell * static_cast<double>(rows), 100.0);
  doc.rect(bar_x, bar_top, bar_w, bar_h, "url(#colorbar)", "stroke=\"#333333\" stroke-width=\"0.5\"");
  constexpr int kTicks = 5;
  for (int k = 0; k < kTicks; ++k) {
    const double frac = static_cast<double>(k) / (kTicks - 1);
    const double v = range.first + (range.second - range.first) * frac;
    const double y = bar_top + bar_h * (1.0 - frac);
    doc.line(bar_x + bar_w, y, bar_x + bar_w + 4.0, y, "#333333");
    doc.text(bar_x + bar_w + 6.0, y + font * 0.35, detail::tick(v), "class=\"tick\"");
  }
  return std::move(doc).finish();
}

namespace detail {

inline std::pair<double, double> data_range(const Matrix<double>& m, const BoolMatrix& valid) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < m.values().size(); ++k) {
    if (!valid.empty() && !valid.values()[k]) continue;
    const double v = m.values()[k];
    if (!std::isfinite(v)) continue;
    if (!any) lo = hi = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    any = true;
  }
  return {lo, hi};
}

}  // namespace detail

/// Distance heatmap: sequential colors over the data range by default.
inline std::string render_heatmap(const DistanceMatrix& d, const RenderSpec& spec,
                                  std::string title = "Pairwise distance") {
  HeatmapGrid g{std::move(title), d.item_ids, d.item_ids, d.dist, {}};
  auto range = spec.value_range.value_or(detail::data_range(d.dist, {}));
  range = widen_degenerate(range.first, range.second);
  return render_grid(g, spec, range, spec.colormap.value_or(Colormap::sequential));
}

/// Similarity heatmap: diverging colors over [-1, 1] by default, so 0 sits
/// on the neutral midpoint. Invalid cells are hatched.
inline std::string render_heatmap(const SimilarityMap& m, const RenderSpec& spec,
                                  std::string title = "Sensor similarity") {
  HeatmapGrid g{std::move(title), m.sensor_ids, m.sensor_ids, m.scores, m.valid};
  auto range = spec.value_range.value_or(std::pair{-1.0, 1.0});
  range = widen_degenerate(range.first, range.second);
  return render_grid(g, spec, range, spec.colormap.value_or(Colormap::diverging));
}

/// Leaves in left-to-right drawing order.
inline std::vector<std::size_t> leaf_order(const LinkageTree& tree) {
  const std::size_t n = tree.leaves();
  std::vector<std::size_t> order;
  if (n == 0) return order;
  order.reserve(n);
  std::vector<std::size_t> stack{tree.root()};
  while (!stack.empty()) {
    const std::size_t node = stack.back();
    stack.pop_back();
    if (node < n) {
      order.push_back(node);
      continue;
    }
    const auto& m = tree.merges[node - n];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return order;
}

/// Rectangular dendrogram with leaves along the bottom. Links and leaf
/// labels of each flat cluster below the threshold share a palette color;
/// links at or above the threshold are neutral.
inline std::string render_dendrogram(const LinkageTree& tree, double threshold, const RenderSpec& spec,
                                     std::string title = "Dendrogram") {
  spec.validate();
  const std::size_t n = tree.leaves();
  const int font = spec.label_font_px;
  const double top = font * 3.0;
  const double left = font * 5.0;
  const double bottom = 12.0 + detail::label_width(tree.item_ids, font);
  const double plot_w = std::max(10.0, spec.width_px - left - 20.0);
  const double plot_h = std::max(10.0, spec.height_px - top - bottom);

  const ClusterPartition part = cut(tree, std::max(threshold, 0.0));
  const double root_h = tree.merges.empty() ? 0.0 : tree.merges.back().height;
  double ymax = std::max(root_h, threshold) * 1.05;
  if (!(ymax > 0.0)) ymax = 1.0;
  auto y_of = [&](double h) { return top + plot_h * (1.0 - h / ymax); };
  auto color_of = [&](int label) {
    return std::string(detail::kClusterPalette[static_cast<std::size_t>(label) % detail::kClusterPalette.size()]);
  };

  const auto order = leaf_order(tree);
  std::vector<double> x(n + tree.merges.size(), 0.0), h(n + tree.merges.size(), 0.0);
  std::vector<std::size_t> rep(n + tree.merges.size(), 0);
  const double slot = n == 0 ? 0.0 : plot_w / static_cast<double>(n);
  for (std::size_t k = 0; k < order.size(); ++k) {
    x[order[k]] = left + (k + 0.5) * slot;
    rep[order[k]] = order[k];
  }

  detail::SvgDoc doc(spec.width_px, spec.height_px, font);
  doc.text(spec.width_px / 2.0, font * 1.6, title, "text-anchor=\"middle\" font-weight=\"bold\"");

  constexpr int kTicks = 5;
  doc.line(left - 6.0, top, left - 6.0, top + plot_h, "#333333");
  for (int k = 0; k < kTicks; ++k) {
    const double v = ymax * k / (kTicks - 1);
    doc.line(left - 10.0, y_of(v), left - 6.0, y_of(v), "#333333");
    doc.text(left - 12.0, y_of(v) + font * 0.35, detail::tick(v), "text-anchor=\"end\" class=\"tick\"");
  }

  for (std::size_t j = 0; j < tree.merges.size(); ++j) {
    const auto& m = tree.merges[j];
    const std::size_t node = n + j;
    x[node] = (x[m.left] + x[m.right]) / 2.0;
    h[node] = m.height;
    rep[node] = rep[m.left];
    const std::string stroke =
        m.height < threshold ? color_of(part.labels[rep[node]]) : std::string(detail::kNeutralLink);
    const double ym = y_of(m.height);
    doc.raw(fmt::format("<path d=\"M{},{} V{} H{} V{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                        detail::num(x[m.left]), detail::num(y_of(h[m.left])), detail::num(ym),
                        detail::num(x[m.right]), detail::num(y_of(h[m.right])), stroke));
  }

  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t leaf = order[k];
    const double lx = x[leaf] + font * 0.35;
    const double ly = top + plot_h + 6.0;
    doc.text(lx, ly, tree.item_ids[leaf],
             fmt::format("class=\"leaf\" text-anchor=\"end\" fill=\"{}\" transform=\"rotate(-90 {} {})\"",
                         color_of(part.labels[leaf]), detail::num(lx), detail::num(ly)));
  }

  const double yt = y_of(threshold);
  doc.line(left - 6.0, yt, left + plot_w, yt, "#d62728", "stroke-dasharray=\"6,4\" class=\"cut\"");
  doc.text(left + plot_w, yt - 4.0, "threshold = " + detail::tick(threshold), "text-anchor=\"end\" fill=\"#d62728\"");
  return std::move(doc).finish();
}

struct DivergenceFigures {
  std::string aggregate_svg;
  std::string flags_svg;
};

/// Aggregate score heatmap and the binary flag grid, clusters by sensors.
inline DivergenceFigures render_divergence(const DivergenceReport& r, const RenderSpec& spec) {
  std::vector<std::string> rows;
  for (const int label : r.cluster_labels) rows.push_back(cluster_name(label));
  HeatmapGrid agg{fmt::format("Aggregate divergence psi_bar (alpha_phi = {})", detail::tick(r.alpha_phi)), rows,
                  r.sensor_ids, r.aggregate, {}};
  auto range = spec.value_range.value_or(detail::data_range(r.aggregate, {}));
  range = widen_degenerate(range.first, range.second);
  DivergenceFigures out;
  out.aggregate_svg = render_grid(agg, spec, range, spec.colormap.value_or(Colormap::sequential));

  spec.validate();
  const int font = spec.label_font_px;
  const double left = 10.0 + detail::label_width(rows, font);
  const double top = font * 2.5 + detail::label_width(r.sensor_ids, font);
  const std::size_t nr = rows.size(), nc = r.sensor_ids.size();
  const double cell = std::min(std::max(10.0, spec.width_px - left - 10.0) / std::max<std::size_t>(nc, 1),
                               std::max(10.0, spec.height_px - top - 10.0) / std::max<std::size_t>(nr, 1));
  detail::SvgDoc doc(spec.width_px, spec.height_px, font);
  doc.text(spec.width_px / 2.0, font * 1.6,
           fmt::format("Root-cause flags (psi_bar > alpha_phi = {})", detail::tick(r.alpha_phi)),
           "text-anchor=\"middle\" font-weight=\"bold\"");
  for (std::size_t a = 0; a < nr; ++a)
    for (std::size_t i = 0; i < nc; ++i) {
      const bool on = r.flags(a, i) != 0;
      doc.rect(left + i * cell, top + a * cell, cell, cell, on ? detail::kFlagOn : detail::kFlagOff,
               fmt::format("stroke=\"#ffffff\" data-row=\"{}\" data-col=\"{}\" data-flag=\"{}\"", a, i, on ? 1 : 0));
    }
  for (std::size_t a = 0; a < nr; ++a)
    doc.text(left - 4.0, top + (a + 0.5) * cell + font * 0.35, rows[a], "text-anchor=\"end\"");
  for (std::size_t i = 0; i < nc; ++i) {
    const double x = left + (i + 0.5) * cell + font * 0.35, y = top - 4.0;
    doc.text(x, y, r.sensor_ids[i],
             fmt::format("text-anchor=\"start\" transform=\"rotate(-90 {} {})\"", detail::num(x), detail::num(y)));
  }
  out.flags_svg = std::move(doc).finish();
  return out;
}

/// Pairwise scores: one row per unordered cluster pair, one column per sensor.
inline std::string render_divergence_pairs(const DivergenceReport& r, const RenderSpec& spec) {
  const std::size_t k = r.cluster_labels.size(), ns = r.sensor_ids.size();
  std::vector<std::string> rows;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      pairs.emplace_back(a, b);
      rows.push_back(cluster_name(r.cluster_labels[a]) + " vs " + cluster_name(r.cluster_labels[b]));
    }
  Matrix<double> values(pairs.size(), ns, 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (std::size_t i = 0; i < ns; ++i) values(p, i) = r.pair_scores(pairs[p].first, pairs[p].second, i);
  HeatmapGrid g{"Pairwise cluster divergence psi", rows, r.sensor_ids, values, {}};
  auto range = spec.value_range.value_or(detail::data_range(values, {}));
  range = widen_degenerate(range.first, range.second);
  return render_grid(g, spec, range, spec.colormap.value_or(Colormap::sequential));
}

}  // namespace lidd
