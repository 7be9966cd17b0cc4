#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "boxplain/viz.hpp"

namespace boxplain {

const std::string& Palette::label_color(std::size_t index) {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  if (index >= colors.size()) {
    throw UsageError("at most " + std::to_string(colors.size()) + " models can share a chart");
  }
  return colors[index];
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw UsageError("nice_ticks: non-finite range");
  if (hi < lo) std::swap(lo, hi);
  if (hi == lo) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / std::max(1, target);
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  const double residual = raw / magnitude;
  const double step =
      (residual < 1.5 ? 1.0 : residual < 3.0 ? 2.0 : residual < 7.0 ? 5.0 : 10.0) * magnitude;
  const double first = std::floor(lo / step + 1e-9);
  const double last = std::ceil(hi / step - 1e-9);
  std::vector<double> ticks;
  for (double k = first; k <= last + 0.5; k += 1.0) {
    const double tick = k * step;
    ticks.push_back(tick == 0.0 ? 0.0 : tick);  // no negative zero
  }
  return ticks;
}

namespace {

// Pixel coordinates: two decimals, no negative zero.
std::string px(double v) {
  char buffer[64];
  const auto r = std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::fixed, 2);
  std::string out(buffer, r.ptr);
  if (out == "-0.00") out = "0.00";
  return out;
}

// Value labels: up to four significant digits.
std::string short_number(double v) {
  if (v == 0.0) return "0";
  char buffer[64];
  const auto r =
      std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::general, 4);
  return std::string(buffer, r.ptr);
}

std::string tick_label(double v, double step) {
  if (std::abs(v) >= 1e6 || (v != 0.0 && step < 1e-4)) return short_number(v);
  const int decimals = std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9)));
  char buffer[64];
  const auto r =
      std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::fixed, decimals);
  std::string out(buffer, r.ptr);
  if (out.size() > 1 && out.front() == '-' &&
      out.find_first_not_of("-0.") == std::string::npos) {
    out.erase(0, 1);
  }
  return out;
}

std::string escape(std::string_view text) {
  std::string out;
  for (const char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

class Svg {
 public:
  Svg(int width, int height, std::string_view digest) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
         << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
         << "\" font-family=\"Helvetica, Arial, sans-serif\">\n"
         << "<!-- boxplain source-json fnv1a64:" << digest << " -->\n"
         << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
         << "\" fill=\"#ffffff\"/>\n";
  }

  void rect(double x, double y, double w, double h, std::string_view attrs) {
    out_ << "<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"" << px(std::max(0.0, w))
         << "\" height=\"" << px(std::max(0.0, h)) << "\" " << attrs << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, std::string_view attrs) {
    out_ << "<line x1=\"" << px(x1) << "\" y1=\"" << px(y1) << "\" x2=\"" << px(x2)
         << "\" y2=\"" << px(y2) << "\" " << attrs << "/>\n";
  }
  void circle(double cx, double cy, double r, std::string_view attrs) {
    out_ << "<circle cx=\"" << px(cx) << "\" cy=\"" << px(cy) << "\" r=\"" << px(r) << "\" "
         << attrs << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& points, std::string_view attrs) {
    out_ << "<polyline points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i) out_ << ' ';
      out_ << px(points[i].first) << ',' << px(points[i].second);
    }
    out_ << "\" fill=\"none\" " << attrs << "/>\n";
  }
  void path(std::string_view d, std::string_view attrs) {
    out_ << "<path d=\"" << d << "\" fill=\"none\" " << attrs << "/>\n";
  }
  void text(double x, double y, std::string_view content, std::string_view attrs = "") {
    out_ << "<text x=\"" << px(x) << "\" y=\"" << px(y) << "\"";
    if (!attrs.empty()) out_ << ' ' << attrs;
    out_ << '>' << escape(content) << "</text>\n";
  }
  void open_group(std::string_view attrs) { out_ << "<g " << attrs << ">\n"; }
  void close_group() { out_ << "</g>\n"; }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

struct Box {
  double x, y, w, h;
  double right() const { return x + w; }
  double bottom() const { return y + h; }
};

/// Affine map from a data interval onto a pixel interval (optionally log10).
struct Scale {
  double d0 = 0.0, d1 = 1.0, p0 = 0.0, p1 = 1.0;
  bool log = false;

  double operator()(double v) const {
    double a = d0, b = d1;
    if (log) {
      v = std::log10(std::max(v, d0));
      a = std::log10(d0);
      b = std::log10(d1);
    }
    return p0 + (v - a) / (b - a) * (p1 - p0);
  }
};

struct Axis {
  std::vector<double> ticks;
  double lo = 0.0, hi = 1.0;
  double step = 1.0;
};

Axis nice_axis(double lo, double hi, int target = 5) {
  Axis axis;
  axis.ticks = nice_ticks(lo, hi, target);
  axis.lo = axis.ticks.front();
  axis.hi = axis.ticks.back();
  axis.step = axis.ticks.size() > 1 ? axis.ticks[1] - axis.ticks[0] : 1.0;
  return axis;
}

// Fewer ticks on narrow axes so labels do not collide.
int tick_target(double pixels) { return std::clamp(static_cast<int>(pixels / 80.0), 2, 8); }

constexpr std::string_view kAxisStyle = "stroke=\"#333333\" stroke-width=\"1\"";
constexpr std::string_view kGridStyle = "stroke=\"#e5e5e5\" stroke-width=\"1\"";
constexpr std::string_view kSmallText = "font-size=\"11\" fill=\"#333333\"";

void draw_x_axis(Svg& svg, const Box& box, const Axis& axis, const Scale& x,
                 std::string_view label) {
  for (const double tick : axis.ticks) {
    const double px_x = x(tick);
    svg.line(px_x, box.y, px_x, box.bottom(), kGridStyle);
    svg.line(px_x, box.bottom(), px_x, box.bottom() + 4, kAxisStyle);
    svg.text(px_x, box.bottom() + 16, tick_label(tick, axis.step),
             std::string(kSmallText) + " text-anchor=\"middle\"");
  }
  svg.line(box.x, box.bottom(), box.right(), box.bottom(), kAxisStyle);
  if (!label.empty()) {
    svg.text(box.x + box.w / 2, box.bottom() + 32, label,
             "font-size=\"12\" fill=\"#333333\" text-anchor=\"middle\"");
  }
}

void draw_y_axis(Svg& svg, const Box& box, const Axis& axis, const Scale& y,
                 std::string_view label) {
  for (const double tick : axis.ticks) {
    const double px_y = y(tick);
    svg.line(box.x, px_y, box.right(), px_y, kGridStyle);
    svg.line(box.x - 4, px_y, box.x, px_y, kAxisStyle);
    svg.text(box.x - 6, px_y + 4, tick_label(tick, axis.step),
             std::string(kSmallText) + " text-anchor=\"end\"");
  }
  svg.line(box.x, box.y, box.x, box.bottom(), kAxisStyle);
  if (!label.empty()) {
    svg.text(box.x - 44, box.y + box.h / 2, label,
             "font-size=\"12\" fill=\"#333333\" text-anchor=\"middle\" transform=\"rotate(-90 " +
                 px(box.x - 44) + ' ' + px(box.y + box.h / 2) + ")\"");
  }
}

void draw_title(Svg& svg, int width, std::string_view title) {
  if (title.empty()) return;
  svg.text(width / 2.0, 22, title,
           "font-size=\"16\" font-weight=\"bold\" fill=\"#222222\" text-anchor=\"middle\"");
}

void draw_legend(Svg& svg, int width, const std::vector<std::string>& entries,
                 const std::vector<std::string>& colors) {
  if (entries.size() < 2) return;
  double x = width - 20.0;
  // Laid out right to left so the block hugs the right edge.
  for (std::size_t i = entries.size(); i-- > 0;) {
    const double text_width = 7.0 * static_cast<double>(entries[i].size());
    x -= text_width;
    svg.text(x, 44, entries[i], std::string(kSmallText));
    x -= 16;
    svg.rect(x, 35, 12, 12, "class=\"legend-swatch\" fill=\"" + colors[i] + "\"");
    x -= 14;
  }
}

std::string attr_label(const std::string& label) { return "data-label=\"" + escape(label) + "\""; }

// ---------------------------------------------------------------------------
// Performance: reverse ECDF steps + boxplots of |residual| with an RMSE dot.

ChartDocument render_performance(const std::vector<const PerformanceResult*>& results,
                                 const RenderOptions& options, const std::string& digest) {
  const int width = options.width;
  const int height = options.height > 0 ? options.height : 440;
  Svg svg(width, height, digest);
  draw_title(svg, width, options.title);

  std::vector<std::string> labels;
  std::vector<std::string> colors;
  for (std::size_t i = 0; i < results.size(); ++i) {
    labels.push_back(results[i]->label);
    colors.push_back(Palette::label_color(i));
  }
  draw_legend(svg, width, labels, colors);

  const double half = width / 2.0;
  const Box left{70, 60, half - 100, height - 120.0};
  const Box right{half + 90, 60, half - 110, height - 120.0};

  double max_abs = 0.0;
  double min_positive = 1.0;
  for (const auto* r : results) {
    max_abs = std::max({max_abs, r->box.max, r->rmse});
    for (const auto& point : r->recdf) {
      if (point.survival > 0.0) min_positive = std::min(min_positive, point.survival);
    }
  }
  const Axis x_axis = nice_axis(0.0, max_abs > 0.0 ? max_abs : 1.0, tick_target(left.w));
  const Scale x{x_axis.lo, x_axis.hi, left.x, left.right()};

  Axis y_axis;
  Scale y;
  if (options.log_y) {
    const double floor_decade = std::pow(10.0, std::floor(std::log10(min_positive / 2.0)));
    for (double t = floor_decade; t <= 1.0 + 1e-12; t *= 10.0) y_axis.ticks.push_back(t);
    y_axis.lo = floor_decade;
    y_axis.hi = 1.0;
    y_axis.step = floor_decade;
    y = Scale{y_axis.lo, y_axis.hi, left.bottom(), left.y, true};
  } else {
    y_axis = nice_axis(0.0, 1.0);
    y = Scale{y_axis.lo, y_axis.hi, left.bottom(), left.y};
  }
  draw_x_axis(svg, left, x_axis, x, "|residual|");
  draw_y_axis(svg, left, y_axis, y, "1 - ECDF(|residual|)");

  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto* r = results[i];
    std::string d = "M" + px(x(0.0)) + ' ' + px(y(1.0));
    for (const auto& point : r->recdf) {
      d += " H" + px(x(point.t)) + " V" + px(y(point.survival));
    }
    svg.path(d, "class=\"recdf\" " + attr_label(r->label) + " stroke=\"" + colors[i] +
                    "\" stroke-width=\"2\"");
  }

  // Boxplots share the residual axis.
  const Scale bx{x_axis.lo, x_axis.hi, right.x, right.right()};
  draw_x_axis(svg, right, x_axis, bx, "|residual|");
  svg.line(right.x, right.y, right.x, right.bottom(), kAxisStyle);
  const double band = right.h / static_cast<double>(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto* r = results[i];
    const double center = right.y + band * (static_cast<double>(i) + 0.5);
    const double half_box = std::min(18.0, band * 0.3);
    const std::string stroke = "stroke=\"" + colors[i] + "\" stroke-width=\"1.5\"";
    svg.text(right.x - 6, center + 4, r->label,
             std::string(kSmallText) + " text-anchor=\"end\"");
    svg.open_group("class=\"boxplot\" " + attr_label(r->label));
    svg.line(bx(r->box.lower_whisker), center, bx(r->box.q1), center, stroke);
    svg.line(bx(r->box.q3), center, bx(r->box.upper_whisker), center, stroke);
    svg.line(bx(r->box.lower_whisker), center - half_box / 2, bx(r->box.lower_whisker),
             center + half_box / 2, stroke);
    svg.line(bx(r->box.upper_whisker), center - half_box / 2, bx(r->box.upper_whisker),
             center + half_box / 2, stroke);
    svg.rect(bx(r->box.q1), center - half_box, bx(r->box.q3) - bx(r->box.q1), 2 * half_box,
             "fill=\"" + colors[i] + "\" fill-opacity=\"0.25\" " + stroke);
    svg.line(bx(r->box.median), center - half_box, bx(r->box.median), center + half_box,
             "stroke=\"" + colors[i] + "\" stroke-width=\"2.5\"");
    for (const double outlier : r->box.outliers) {
      svg.circle(bx(outlier), center, 2.5,
                 "class=\"outlier\" fill=\"none\" stroke=\"" + colors[i] + "\"");
    }
    svg.circle(bx(r->rmse), center, 4.5,
               "class=\"rmse\" fill=\"" + std::string(Palette::kRmse) + "\"");
    svg.close_group();
  }
  return {svg.finish(), width, height, digest};
}

// ---------------------------------------------------------------------------
// Line charts (pdp, ale, cp)

struct Series {
  std::string label;
  std::string variable;
  std::string color;
  std::vector<std::pair<double, double>> points;
  std::optional<std::pair<double, double>> anchor;
};

struct CategoricalSeries {
  std::string label;
  std::string variable;
  std::string color;
  std::vector<std::pair<std::string, double>> points;
  std::string observed;
};

struct Facet {
  std::string variable;
  std::vector<const Series*> numeric;
  std::vector<const CategoricalSeries*> categorical;
};

ChartDocument render_lines(const std::vector<Series>& series,
                           const std::vector<CategoricalSeries>& categorical,
                           const std::vector<std::string>& legend,
                           const std::vector<std::string>& legend_colors, bool single_panel,
                           std::string_view x_label, const RenderOptions& options,
                           const std::string& digest) {
  std::vector<Facet> facets;
  const auto facet_for = [&](const std::string& variable) -> Facet& {
    const std::string key = single_panel ? std::string() : variable;
    for (auto& facet : facets) {
      if (facet.variable == key) return facet;
    }
    facets.push_back({key, {}, {}});
    return facets.back();
  };
  for (const auto& s : series) facet_for(s.variable).numeric.push_back(&s);
  for (const auto& s : categorical) facet_for(s.variable).categorical.push_back(&s);

  const std::size_t count = std::max<std::size_t>(1, facets.size());
  const auto columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::size_t rows = (count + columns - 1) / columns;
  const int width = options.width;
  const int height = options.height > 0 ? options.height : static_cast<int>(60 + rows * 300);
  Svg svg(width, height, digest);
  draw_title(svg, width, options.title);
  draw_legend(svg, width, legend, legend_colors);

  const double cell_w = (width - 20.0) / static_cast<double>(columns);
  const double cell_h = (height - 60.0) / static_cast<double>(rows);
  for (std::size_t f = 0; f < facets.size(); ++f) {
    const Facet& facet = facets[f];
    const double cx = 10.0 + cell_w * static_cast<double>(f % columns);
    const double cy = 60.0 + cell_h * static_cast<double>(f / columns);
    const Box box{cx + 70, cy + 20, cell_w - 90, cell_h - 70};

    double y_lo = std::numeric_limits<double>::infinity();
    double y_hi = -y_lo;
    double x_lo = y_lo;
    double x_hi = -y_lo;
    for (const auto* s : facet.numeric) {
      for (const auto& [px_x, px_y] : s->points) {
        x_lo = std::min(x_lo, px_x);
        x_hi = std::max(x_hi, px_x);
        y_lo = std::min(y_lo, px_y);
        y_hi = std::max(y_hi, px_y);
      }
      if (s->anchor) {
        y_lo = std::min(y_lo, s->anchor->second);
        y_hi = std::max(y_hi, s->anchor->second);
      }
    }
    std::vector<std::string> levels;
    for (const auto* s : facet.categorical) {
      for (const auto& [level, value] : s->points) {
        if (std::find(levels.begin(), levels.end(), level) == levels.end()) {
          levels.push_back(level);
        }
        y_lo = std::min(y_lo, value);
        y_hi = std::max(y_hi, value);
      }
    }
    std::sort(levels.begin(), levels.end());
    if (!std::isfinite(y_lo)) {
      y_lo = 0.0;
      y_hi = 1.0;
    }
    const Axis y_axis = nice_axis(y_lo, y_hi);
    const Scale y{y_axis.lo, y_axis.hi, box.bottom(), box.y};
    draw_y_axis(svg, box, y_axis, y, "response");
    if (!facet.variable.empty()) {
      svg.text(box.x + box.w / 2, box.y - 6, facet.variable,
               "font-size=\"13\" font-weight=\"bold\" fill=\"#222222\" text-anchor=\"middle\"");
    }

    if (!facet.numeric.empty()) {
      if (single_panel) {
        x_lo = 0.0;
        x_hi = 1.0;
      }
      const Axis x_axis = nice_axis(x_lo, x_hi, tick_target(box.w));
      const Scale x{x_axis.lo, x_axis.hi, box.x, box.right()};
      draw_x_axis(svg, box, x_axis, x, single_panel ? x_label : facet.variable);
      for (const auto* s : facet.numeric) {
        std::vector<std::pair<double, double>> pixels;
        for (const auto& [vx, vy] : s->points) pixels.emplace_back(x(vx), y(vy));
        svg.polyline(pixels, "class=\"profile\" " + attr_label(s->label) +
                                 " data-variable=\"" + escape(s->variable) + "\" stroke=\"" +
                                 s->color + "\" stroke-width=\"2\"");
        if (s->anchor) {
          svg.circle(x(s->anchor->first), y(s->anchor->second), 4,
                     "class=\"anchor\" fill=\"" + s->color + "\"");
        }
      }
    } else {
      // Categorical axis: one band per level.
      svg.line(box.x, box.bottom(), box.right(), box.bottom(), kAxisStyle);
      const double band = box.w / static_cast<double>(std::max<std::size_t>(1, levels.size()));
      for (std::size_t l = 0; l < levels.size(); ++l) {
        svg.text(box.x + band * (static_cast<double>(l) + 0.5), box.bottom() + 16, levels[l],
                 std::string(kSmallText) + " text-anchor=\"middle\"");
      }
      for (const auto* s : facet.categorical) {
        for (const auto& [level, value] : s->points) {
          const auto l = static_cast<std::size_t>(
              std::find(levels.begin(), levels.end(), level) - levels.begin());
          const bool own = level == s->observed;
          svg.circle(box.x + band * (static_cast<double>(l) + 0.5), y(value), own ? 5 : 3.5,
                     std::string(own ? "class=\"anchor\" " : "class=\"level-point\" ") +
                         attr_label(s->label) + " fill=\"" + s->color + "\"");
        }
      }
    }
  }
  return {svg.finish(), width, height, digest};
}

ChartDocument render_profiles(const std::vector<const ProfileCurve*>& curves,
                              const RenderOptions& options, const std::string& digest) {
  std::vector<std::string> labels;
  std::vector<std::string> colors;
  std::vector<Series> series;
  for (const auto* curve : curves) {
    auto it = std::find(labels.begin(), labels.end(), curve->label);
    if (it == labels.end()) {
      labels.push_back(curve->label);
      colors.push_back(Palette::label_color(labels.size() - 1));
      it = labels.end() - 1;
    }
    Series s{curve->label, curve->variable, colors[static_cast<std::size_t>(it - labels.begin())],
             {}, std::nullopt};
    for (Eigen::Index i = 0; i < curve->grid.size(); ++i) {
      s.points.emplace_back(curve->grid[i], curve->response[i]);
    }
    series.push_back(std::move(s));
  }
  return render_lines(series, {}, labels, colors, false, "", options, digest);
}

ChartDocument render_cp(const std::vector<const CPProfile*>& profiles,
                        const RenderOptions& options, const std::string& digest) {
  bool normalized = false;
  for (const auto* profile : profiles) {
    for (const auto& cp : profile->curves) normalized = normalized || cp.normalized.has_value();
  }
  std::vector<std::string> legend;
  std::vector<std::string> colors;
  std::vector<Series> series;
  std::vector<CategoricalSeries> categorical;
  std::size_t next_color = 0;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto* profile = profiles[p];
    if (!normalized) {
      legend.push_back(profile->label);
      colors.push_back(Palette::label_color(p));
    }
    for (const auto& cp : profile->curves) {
      std::string color;
      if (normalized) {
        if (!cp.normalized) continue;
        // Shared axis: one color per (model, variable) series.
        color = Palette::label_color(next_color++);
        legend.push_back(profiles.size() > 1 ? profile->label + ": " + cp.curve.variable
                                             : cp.curve.variable);
        colors.push_back(color);
      } else {
        color = colors.back();
      }
      if (!cp.levels.empty()) {
        CategoricalSeries s{profile->label, cp.curve.variable, color, {},
                            std::get<std::string>(cp.observed)};
        for (std::size_t i = 0; i < cp.levels.size(); ++i) {
          s.points.emplace_back(cp.levels[i], cp.curve.response[static_cast<Eigen::Index>(i)]);
        }
        categorical.push_back(std::move(s));
        continue;
      }
      const Eigen::VectorXd& xs = normalized ? *cp.normalized : cp.curve.grid;
      Series s{profile->label, cp.curve.variable, color, {}, std::nullopt};
      for (Eigen::Index i = 0; i < xs.size(); ++i) s.points.emplace_back(xs[i], cp.curve.response[i]);
      const double own = std::get<double>(cp.observed);
      for (Eigen::Index i = 0; i < cp.curve.grid.size(); ++i) {
        if (cp.curve.grid[i] == own) s.anchor = std::make_pair(xs[i], cp.curve.response[i]);
      }
      series.push_back(std::move(s));
    }
  }
  if (normalized && legend.size() == 1) legend.clear();
  return render_lines(series, categorical, legend, colors, normalized,
                      "quantile of variable value", options, digest);
}

// ---------------------------------------------------------------------------
// Importance: interval bars from each model's own baseline.

ChartDocument render_importance(const std::vector<const ImportanceResult*>& results,
                                const RenderOptions& options, const std::string& digest) {
  std::vector<ImportanceResult> copies;
  for (const auto* r : results) copies.push_back(*r);
  const auto rows = compare_importance(copies);

  std::vector<std::string> labels;
  std::vector<std::string> colors;
  for (std::size_t i = 0; i < results.size(); ++i) {
    labels.push_back(results[i]->label);
    colors.push_back(Palette::label_color(i));
  }
  const double bar_h = 14.0;
  const double group_gap = 10.0;
  std::vector<std::string> variables;
  for (const auto& row : rows) {
    if (std::find(variables.begin(), variables.end(), row.variable) == variables.end()) {
      variables.push_back(row.variable);
    }
  }
  const double content_h = static_cast<double>(rows.size()) * (bar_h + 4) +
                           static_cast<double>(variables.size()) * group_gap;
  const int width = options.width;
  const int height =
      options.height > 0 ? options.height : static_cast<int>(std::ceil(content_h + 120));
  Svg svg(width, height, digest);
  draw_title(svg, width, options.title);
  draw_legend(svg, width, labels, colors);

  const Box box{160, 60, width - 190.0, height - 110.0};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& row : rows) {
    lo = std::min({lo, row.baseline, row.permuted_mean});
    hi = std::max({hi, row.baseline, row.permuted_mean});
  }
  if (rows.empty()) {
    lo = 0.0;
    hi = 1.0;
  }
  const Axis x_axis = nice_axis(lo, hi, tick_target(box.w));
  const Scale x{x_axis.lo, x_axis.hi, box.x, box.right()};
  draw_x_axis(svg, box, x_axis, x,
              "loss (" + std::string(to_string(results.front()->loss)) + ")");
  svg.line(box.x, box.y, box.x, box.bottom(), kAxisStyle);

  for (std::size_t i = 0; i < results.size(); ++i) {
    svg.line(x(results[i]->baseline), box.y, x(results[i]->baseline), box.bottom(),
             "class=\"baseline\" " + attr_label(results[i]->label) + " stroke=\"" + colors[i] +
                 "\" stroke-dasharray=\"4 3\"");
  }
  const double scale = box.h / std::max(content_h, 1.0);
  double cursor = box.y;
  std::string current;
  for (const auto& row : rows) {
    if (row.variable != current) {
      if (!current.empty()) cursor += group_gap * scale;
      current = row.variable;
      svg.text(box.x - 8, cursor + bar_h * scale * 0.8, row.variable,
               std::string(kSmallText) + " text-anchor=\"end\"");
    }
    const auto index = static_cast<std::size_t>(
        std::find(labels.begin(), labels.end(), row.label) - labels.begin());
    const double a = x(row.baseline);
    const double b = x(row.permuted_mean);
    svg.rect(std::min(a, b), cursor, std::abs(b - a), bar_h * scale,
             "class=\"importance-bar\" " + attr_label(row.label) + " data-variable=\"" +
                 escape(row.variable) + "\" fill=\"" + colors[index] + "\"");
    cursor += (bar_h + 4) * scale;
  }
  return {svg.finish(), width, height, digest};
}

// ---------------------------------------------------------------------------
// Merging path: level means plus a dendrogram over cumulative Ward cost.

ChartDocument render_factor_merge(const std::vector<const MergingPath*>& paths,
                                  const RenderOptions& options, const std::string& digest) {
  std::size_t most_levels = 1;
  for (const auto* path : paths) most_levels = std::max(most_levels, path->levels.size());
  const int width = options.width;
  const int height = options.height > 0
                         ? options.height
                         : static_cast<int>(130 + 26 * static_cast<double>(most_levels));
  Svg svg(width, height, digest);
  draw_title(svg, width, options.title);

  const double panel_w = (width - 20.0) / static_cast<double>(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const MergingPath& path = *paths[p];
    const double left = 10.0 + panel_w * static_cast<double>(p);
    svg.open_group("class=\"merge-panel\" " + attr_label(path.label));
    svg.text(left + panel_w / 2, 46, path.label + ": " + path.variable,
             "font-size=\"13\" font-weight=\"bold\" fill=\"#222222\" text-anchor=\"middle\"");
    const Box means{left + 90, 64, panel_w * 0.45 - 90, height - 114.0};
    const Box tree{means.right() + 20, 64, panel_w * 0.55 - 40, height - 114.0};

    // Highest mean on top.
    const std::size_t L = path.levels.size();
    const double row_h = means.h / static_cast<double>(std::max<std::size_t>(1, L));
    std::map<std::string, double> row_y;
    for (std::size_t i = 0; i < L; ++i) {
      row_y[path.levels[i].level] = means.y + row_h * (static_cast<double>(L - 1 - i) + 0.5);
    }
    std::map<std::string, std::size_t> group_of;
    for (std::size_t g = 0; g < path.groups.size(); ++g) {
      for (const auto& level : path.groups[g]) group_of[level] = g;
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& level : path.levels) {
      lo = std::min(lo, level.mean);
      hi = std::max(hi, level.mean);
    }
    const Axis mean_axis = nice_axis(lo, hi, tick_target(means.w));
    const Scale mx{mean_axis.lo, mean_axis.hi, means.x, means.right()};
    draw_x_axis(svg, means, mean_axis, mx, "mean response");
    for (const auto& level : path.levels) {
      const double yy = row_y[level.level];
      const auto& color = Palette::label_color(group_of[level.level] % Palette::kMaxLabels);
      svg.text(means.x - 6, yy + 4, level.level,
               std::string(kSmallText) + " text-anchor=\"end\"");
      svg.circle(mx(level.mean), yy, 4, "class=\"level-mean\" fill=\"" + color + "\"");
    }

    const double total = path.steps.empty() ? 1.0 : path.steps.back().cumulative_cost;
    const Axis cost_axis = nice_axis(0.0, total > 0.0 ? total : 1.0, tick_target(tree.w));
    const Scale cx{cost_axis.lo, cost_axis.hi, tree.x, tree.right()};
    draw_x_axis(svg, tree, cost_axis, cx, "cumulative merge cost");
    struct Node {
      std::vector<std::string> members;
      double y;
      double x;
    };
    std::vector<Node> live;
    for (const auto& level : path.levels) live.push_back({{level.level}, row_y[level.level], cx(0)});
    for (const auto& step : path.steps) {
      const auto a = std::find_if(live.begin(), live.end(),
                                  [&](const Node& n) { return n.members == step.group_a; });
      if (a == live.end() || a + 1 == live.end()) break;
      const auto b = a + 1;
      const double at = cx(step.cumulative_cost);
      const std::string style = "class=\"merge\" stroke=\"#555555\" stroke-width=\"1.5\"";
      svg.line(a->x, a->y, at, a->y, style);
      svg.line(b->x, b->y, at, b->y, style);
      svg.line(at, a->y, at, b->y, style);
      a->members.insert(a->members.end(), b->members.begin(), b->members.end());
      a->y = (a->y + b->y) / 2;
      a->x = at;
      live.erase(b);
    }
    svg.close_group();
  }
  return {svg.finish(), width, height, digest};
}

// ---------------------------------------------------------------------------
// Break-down waterfall.

ChartDocument render_breakdown(const std::vector<const Attribution*>& attributions,
                               const RenderOptions& options, const std::string& digest) {
  const double row_h = 26.0;
  double content = 0.0;
  for (const auto* a : attributions) content += 70.0 + row_h * static_cast<double>(a->steps.size() + 2);
  const int width = options.width;
  const int height = options.height > 0 ? options.height : static_cast<int>(content + 40);
  Svg svg(width, height, digest);
  draw_title(svg, width, options.title);

  const double scale = (height - 40.0) / std::max(content, 1.0);
  double top = 40.0;
  for (const auto* attribution : attributions) {
    const auto rows = attribution->steps.size() + 2;
    const double panel_h = (70.0 + row_h * static_cast<double>(rows)) * scale;
    const Box box{200, top + 24, width - 240.0, panel_h - 70.0 * scale};
    const double band = box.h / static_cast<double>(rows);
    svg.open_group("class=\"breakdown-panel\" " + attr_label(attribution->label));
    svg.text(box.x + box.w / 2, top + 14, attribution->label,
             "font-size=\"13\" font-weight=\"bold\" fill=\"#222222\" text-anchor=\"middle\"");

    double lo = std::min(attribution->baseline, attribution->prediction);
    double hi = std::max(attribution->baseline, attribution->prediction);
    double running = attribution->baseline;
    for (const auto& step : attribution->steps) {
      running += step.contribution;
      lo = std::min(lo, running);
      hi = std::max(hi, running);
    }
    const Axis axis = nice_axis(lo, hi, tick_target(box.w));
    const Scale x{axis.lo, axis.hi, box.x, box.right()};
    draw_x_axis(svg, box, axis, x, "prediction");

    const auto row_top = [&](std::size_t r) { return box.y + band * static_cast<double>(r); };
    const double bar = band * 0.7;
    const double pad = (band - bar) / 2;
    svg.rect(std::min(x(attribution->baseline), x(attribution->prediction)), box.y,
             std::abs(x(attribution->prediction) - x(attribution->baseline)), box.h,
             "class=\"bd-frame\" fill=\"" + std::string(Palette::kReference) +
                 "\" fill-opacity=\"0.2\"");
    svg.text(box.x - 8, row_top(0) + band / 2 + 4, "intercept",
             std::string(kSmallText) + " text-anchor=\"end\"");
    svg.line(x(attribution->baseline), row_top(0) + pad, x(attribution->baseline),
             row_top(0) + pad + bar,
             "class=\"bd-reference\" stroke=\"" + std::string(Palette::kReference) +
                 "\" stroke-width=\"3\"");
    svg.text(x(attribution->baseline) + 6, row_top(0) + band / 2 + 4,
             short_number(attribution->baseline), std::string(kSmallText));

    running = attribution->baseline;
    for (std::size_t s = 0; s < attribution->steps.size(); ++s) {
      const auto& step = attribution->steps[s];
      const double y0 = row_top(s + 1);
      const double before = running;
      running += step.contribution;
      svg.text(box.x - 8, y0 + band / 2 + 4, step.variable + " = " + format_cell(step.value),
               std::string(kSmallText) + " text-anchor=\"end\"");
      if (step.contribution > 0.0) {
        svg.rect(x(before), y0 + pad, x(running) - x(before), bar,
                 "class=\"bd-up\" fill=\"" + std::string(Palette::kPositive) + "\"");
      } else if (step.contribution < 0.0) {
        svg.rect(x(running), y0 + pad, x(before) - x(running), bar,
                 "class=\"bd-down\" fill=\"" + std::string(Palette::kNegative) + "\"");
      } else {
        svg.line(x(before), y0 + pad, x(before), y0 + pad + bar,
                 "class=\"bd-zero\" stroke=\"" + std::string(Palette::kReference) + "\"");
      }
      // Connector from the previous row's end.
      svg.line(x(before), y0 - pad, x(before), y0 + pad,
               "stroke=\"#777777\" stroke-dasharray=\"2 2\"");
      svg.text(std::max(x(before), x(running)) + 6, y0 + band / 2 + 4,
               (step.contribution > 0 ? "+" : "") + short_number(step.contribution),
               std::string(kSmallText));
    }
    const double y_last = row_top(rows - 1);
    svg.text(box.x - 8, y_last + band / 2 + 4, "prediction",
             std::string(kSmallText) + " text-anchor=\"end\"");
    svg.rect(std::min(x(attribution->baseline), x(attribution->prediction)), y_last + pad,
             std::abs(x(attribution->prediction) - x(attribution->baseline)), bar,
             "class=\"bd-prediction\" fill=\"" + std::string(Palette::kReference) + "\"");
    svg.text(std::max(x(attribution->baseline), x(attribution->prediction)) + 6,
             y_last + band / 2 + 4, short_number(attribution->prediction),
             std::string(kSmallText));
    svg.close_group();
    top += panel_h;
  }
  return {svg.finish(), width, height, digest};
}

template <typename T>
std::vector<const T*> collect(const std::vector<ExplainerResult>& results) {
  std::vector<const T*> out;
  for (const auto& result : results) out.push_back(&std::get<T>(result));
  return out;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

}  // namespace

ChartDocument render(const std::vector<ExplainerResult>& results, const RenderOptions& options) {
  if (results.empty()) throw UsageError("render: no results");
  if (options.width < 200) throw UsageError("render: width must be at least 200");
  if (options.height != 0 && options.height < 150) {
    throw UsageError("render: height must be at least 150");
  }
  const std::string kind = result_kind(results.front());
  std::vector<std::string> labels;
  for (const auto& result : results) {
    if (result_kind(result) != kind) {
      throw UsageError("render: cannot mix '" + kind + "' and '" + result_kind(result) +
                       "' results");
    }
    labels.push_back(result_label(result));
  }
  if (kind != "pdp" && kind != "ale") {
    require_distinct_labels(labels);
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() > Palette::kMaxLabels) {
    throw UsageError("render: at most 10 models can share a chart");
  }
  const std::string digest = hex64(fnv1a64(export_json(results)));

  if (kind == "performance") {
    return render_performance(collect<PerformanceResult>(results), options, digest);
  }
  if (kind == "pdp" || kind == "ale") {
    // Several variables per label are allowed; (label, variable) must be unique.
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& result : results) {
      const auto& curve = std::get<ProfileCurve>(result);
      if (!seen.emplace(curve.label, curve.variable).second) {
        throw UsageError("render: duplicate curve for model '" + curve.label +
                         "' and variable '" + curve.variable + "'");
      }
    }
    return render_profiles(collect<ProfileCurve>(results), options, digest);
  }
  if (kind == "cp") return render_cp(collect<CPProfile>(results), options, digest);
  if (kind == "importance") {
    return render_importance(collect<ImportanceResult>(results), options, digest);
  }
  if (kind == "factor_merge") {
    return render_factor_merge(collect<MergingPath>(results), options, digest);
  }
  return render_breakdown(collect<Attribution>(results), options, digest);
}

}  // namespace boxplain
