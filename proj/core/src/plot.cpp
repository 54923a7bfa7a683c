#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "ntklab/error.hpp"
#include "ntklab/report.hpp"

namespace ntklab {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 180, kTop = 30, kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string join_names() {
  std::string names;
  for (const auto& n : metric_names()) names += (names.empty() ? "" : ", ") + n;
  return names;
}

}  // namespace

std::vector<PlotSeries> load_plot_series(std::span<const std::filesystem::path> csvs) {
  std::vector<PlotSeries> out;
  for (const auto& path : csvs) {
    PlotSeries s;
    const std::string parent = path.parent_path().filename().string();
    s.label = parent.find('=') != std::string::npos ? parent : path.stem().string();
    s.records = read_metrics_csv(path);
    if (s.records.empty()) throw DataError(path.string() + ": metrics file has no records");
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_metric_svg(const std::vector<PlotSeries>& series, const std::string& metric) {
  const auto& names = metric_names();
  if (std::find(names.begin(), names.end(), metric) == names.end()) {
    throw UsageError("unknown metric '" + metric + "'; valid names: " + join_names());
  }
  if (series.empty()) throw UsageError("nothing to plot");

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  std::set<std::size_t> switches;
  for (const auto& s : series) {
    if (s.records.empty()) throw DataError("series '" + s.label + "' has no records");
    for (std::size_t i = 0; i < s.records.size(); ++i) {
      const MetricRecord& r = s.records[i];
      xmin = std::min(xmin, static_cast<double>(r.global_step));
      xmax = std::max(xmax, static_cast<double>(r.global_step));
      if (i > 0 && r.task_index != s.records[i - 1].task_index) switches.insert(s.records[i - 1].global_step);
      const auto v = metric_value(r, metric);
      if (!v || !std::isfinite(*v)) continue;
      ymin = std::min(ymin, *v);
      ymax = std::max(ymax, *v);
    }
  }
  if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  if (xmax == xmin) xmax = xmin + 1.0;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    svg += "<line x1=\"" + num(px(xv)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(xv)) + "\" y2=\"" +
           num(kTop + ph + 4) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
           tick_label(xv) + "</text>\n";
    svg += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
           num(py(yv)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" +
           tick_label(yv) + "</text>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) +
         "\" text-anchor=\"middle\">probe step</text>\n";
  svg += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(kTop + ph / 2) + ")\">" + escape(metric) + "</text>\n";

  for (std::size_t step : switches) {
    const double x = px(static_cast<double>(step));
    svg += "<line class=\"task-switch\" x1=\"" + num(x) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(x) +
           "\" y2=\"" + num(kTop + ph) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
               points + "\"/>\n";
      }
      points.clear();
    };
    for (const MetricRecord& r : series[k].records) {
      const auto v = metric_value(r, metric);
      if (!v || !std::isfinite(*v)) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += num(px(static_cast<double>(r.global_step))) + "," + num(py(*v));
    }
    flush();
    const double ly = kTop + 12 + 16 * static_cast<double>(k);
    const double lx = kLeft + pw + 12;
    svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 18) + "\" y2=\"" +
           num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(lx + 24) + "\" y=\"" + num(ly) + "\">" + escape(series[k].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void plot_metrics(std::span<const std::filesystem::path> csvs, const std::string& metric,
                  const std::filesystem::path& out) {
  const auto& names = metric_names();
  if (std::find(names.begin(), names.end(), metric) == names.end()) {
    throw UsageError("unknown metric '" + metric + "'; valid names: " + join_names());
  }
  const std::string svg = render_metric_svg(load_plot_series(csvs), metric);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw DataError("cannot write " + out.string());
  f << svg;
}

}  // namespace ntklab
