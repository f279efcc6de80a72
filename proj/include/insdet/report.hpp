#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "insdet/eval.hpp"

namespace insdet {

namespace detail {

// Interface values are percentages; undefined metrics are null.
inline nlohmann::ordered_json percent(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v * 100.0;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

// Structured report keyed by the published table columns:
//   AP / AP50 / AP75 -> {avg, hard, easy, small, medium, large}
//   AR@max10 / AR@max100 -> same breakdowns
// plus a flat "summary" row using the AR_s/m/l@max100 names.
inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  using detail::percent;
  nlohmann::ordered_json j;
  auto ap_table = [&](auto field) {
    nlohmann::ordered_json row;
    for (std::size_t i = 0; i < kBreakdowns.size(); ++i) {
      row[std::string(to_string(kBreakdowns[i]))] = percent(field(r.ap[i]));
    }
    return row;
  };
  j["AP"] = ap_table([](const ApSummary& s) { return s.ap; });
  j["AP50"] = ap_table([](const ApSummary& s) { return s.ap50; });
  j["AP75"] = ap_table([](const ApSummary& s) { return s.ap75; });
  for (const auto& ar : r.ar) {
    nlohmann::ordered_json row;
    for (std::size_t i = 0; i < kBreakdowns.size(); ++i) {
      row[std::string(to_string(kBreakdowns[i]))] = percent(ar.by_breakdown[i]);
    }
    j["AR@max" + std::to_string(ar.max_dets)] = row;
  }

  nlohmann::ordered_json summary;
  summary["AP"] = percent(r.overall().ap);
  summary["AP50"] = percent(r.overall().ap50);
  summary["AP75"] = percent(r.overall().ap75);
  for (const auto& ar : r.ar) {
    const std::string k = "@max" + std::to_string(ar.max_dets);
    summary["AR" + k] = percent(ar.by_breakdown[0]);
  }
  for (const auto& ar : r.ar) {
    if (ar.max_dets != 100) continue;
    summary["AR_s@max100"] = percent(ar.by_breakdown[3]);
    summary["AR_m@max100"] = percent(ar.by_breakdown[4]);
    summary["AR_l@max100"] = percent(ar.by_breakdown[5]);
  }
  j["summary"] = summary;

  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  for (double t : ar_iou_thresholds(r.config.ar_grid)) grid.push_back(t);
  j["config"] = {{"ap_iou_thresholds", ap_iou_thresholds()},
                 {"ar_grid", std::string(to_string(r.config.ar_grid))},
                 {"ar_iou_thresholds", grid},
                 {"recall_points", kRecallPoints},
                 {"units", "percent"}};
  j["counts"] = {{"images", r.num_images},
                 {"ground_truth", r.num_ground_truth},
                 {"detections", r.num_detections}};
  return j;
}

// Mean interpolated curve: "recall,precision" rows at recall k/100.
inline std::string pr_interpolated_csv(const PrCurves& c) {
  std::ostringstream os;
  os << "recall,precision\n";
  for (int k = 0; k < kRecallPoints; ++k) {
    os << detail::fmt_double(k / 100.0) << ',' << detail::fmt_double(c.mean_interpolated[k]) << '\n';
  }
  return os.str();
}

// Raw staircase of every class: "instance_id,recall,precision" rows.
inline std::string pr_staircase_csv(const PrCurves& c) {
  std::ostringstream os;
  os << "instance_id,recall,precision\n";
  for (const auto& cls : c.classes) {
    for (const auto& p : cls.staircase) {
      os << cls.instance_id << ',' << detail::fmt_double(p.recall) << ','
         << detail::fmt_double(p.precision) << '\n';
    }
  }
  return os.str();
}

struct PlotSeries {
  std::string label;
  const PrCurves* curves = nullptr;
};

// Static SVG of interpolated PR curves, one polyline per series, with AP at
// the curve's IoU threshold in the legend.
inline std::string pr_plot_svg(const std::vector<PlotSeries>& series) {
  constexpr double W = 480, H = 400, L = 60, T = 20, R = 20, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 10; i += 2) {
    const double v = i / 10.0;
    const double x = L + v * pw, y = T + (1 - v) * ph;
    os << "<text x=\"" << x << "\" y=\"" << (T + ph + 16) << "\" font-size=\"11\" text-anchor=\"middle\">"
       << v << "</text>\n";
    os << "<text x=\"" << (L - 6) << "\" y=\"" << (y + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
       << v << "</text>\n";
  }
  os << "<text x=\"" << (L + pw / 2) << "\" y=\"" << (H - 10)
     << "\" font-size=\"13\" text-anchor=\"middle\">Recall</text>\n";
  os << "<text x=\"16\" y=\"" << (T + ph / 2) << "\" font-size=\"13\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 16 " << (T + ph / 2) << ")\">Precision</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& c = *series[s].curves;
    const char* color = colors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (int k = 0; k < kRecallPoints; ++k) {
      os << detail::fmt_double(L + (k / 100.0) * pw) << ','
         << detail::fmt_double(T + (1 - c.mean_interpolated[k]) * ph) << ' ';
    }
    os << "\"/>\n";
    char legend[64];
    std::snprintf(legend, sizeof legend, " (AP%.0f=%.2f)", c.iou_threshold * 100,
                  c.ap ? *c.ap * 100 : 0.0);
    const double ly = T + 18 + 18 * double(s);
    os << "<line x1=\"" << (L + pw - 170) << "\" y1=\"" << (ly - 4) << "\" x2=\"" << (L + pw - 150)
       << "\" y2=\"" << (ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << (L + pw - 145) << "\" y=\"" << ly << "\" font-size=\"11\">"
       << series[s].label << legend << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace insdet
