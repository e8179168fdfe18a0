#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "trfe/errors.hpp"

namespace trfe {

/// One row of the sigma_v sweep; rates are J/T, normalized columns divide by
/// the open-loop rate. `error` is nonempty when the row's pipeline failed.
struct SweepRow {
  double sigma_v = 0.0;
  double j_ol_rate = 0.0;
  double j_sc_rate = 0.0;
  double j_irr_ol_rate = 0.0;
  double j_lqg_rate = 0.0;
  double j_ol_norm = 1.0;
  double j_sc_norm = 0.0;
  double j_irr_ol_norm = 0.0;
  double j_lqg_norm = 0.0;
  double alpha_hat = 0.0;
  double beta_max_hat = 0.0;
  double beta_star = 0.0;
  int dropped_betas = 0;
  double j_ol_se_rate = 0.0;
  double j_sc_se_rate = 0.0;
  double j_lqg_se_rate = 0.0;
  std::string error;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

/// Normalized cost vs sensor noise as an SVG document: log-scaled abscissa,
/// three series (SC, OL-MI, LQG) and the open-loop line at 1. Output bytes
/// are a pure function of the rows.
inline std::string render_plot_svg(const std::vector<SweepRow>& rows) {
  std::vector<const SweepRow*> ok;
  for (const auto& r : rows)
    if (r.error.empty()) ok.push_back(&r);
  if (ok.size() < 2)
    throw Error("render_plot: need at least 2 valid rows, have " +
                std::to_string(ok.size()));

  const double width = 720, height = 480;
  const double ml = 70, mr = 160, mt = 30, mb = 55;
  double xmin = std::log10(ok.front()->sigma_v);
  double xmax = xmin;
  double ymin = 0.0, ymax = 1.05;
  for (const auto* r : ok) {
    const double lx = std::log10(r->sigma_v);
    xmin = std::min(xmin, lx);
    xmax = std::max(xmax, lx);
    for (double v : {r->j_sc_norm, r->j_irr_ol_norm, r->j_lqg_norm}) {
      if (std::isfinite(v)) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  ymax += 0.05 * (ymax - ymin);
  ymin -= 0.05 * (ymax - ymin);
  auto px = [&](double lx) {
    return ml + (lx - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
         "height=\"480\" viewBox=\"0 0 720 480\">\n";
  svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";

  // axes
  svg += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" +
         detail::svg_num(height - mb) + "\" x2=\"" +
         detail::svg_num(width - mr) + "\" y2=\"" +
         detail::svg_num(height - mb) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" +
         detail::svg_num(mt) + "\" x2=\"" + detail::svg_num(ml) + "\" y2=\"" +
         detail::svg_num(height - mb) + "\" stroke=\"black\"/>\n";

  // x ticks at the data abscissas
  for (const auto* r : ok) {
    const double x = px(std::log10(r->sigma_v));
    svg += "<line x1=\"" + detail::svg_num(x) + "\" y1=\"" +
           detail::svg_num(height - mb) + "\" x2=\"" + detail::svg_num(x) +
           "\" y2=\"" + detail::svg_num(height - mb + 5) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(x) + "\" y=\"" +
           detail::svg_num(height - mb + 20) +
           "\" font-size=\"11\" text-anchor=\"middle\">" +
           detail::svg_num(r->sigma_v) + "</text>\n";
  }
  // y ticks
  for (int k = 0; k <= 5; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 5.0;
    const double y = py(yv);
    svg += "<line x1=\"" + detail::svg_num(ml - 5) + "\" y1=\"" +
           detail::svg_num(y) + "\" x2=\"" + detail::svg_num(ml) + "\" y2=\"" +
           detail::svg_num(y) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(ml - 9) + "\" y=\"" +
           detail::svg_num(y + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + detail::svg_num(yv) +
           "</text>\n";
  }
  svg += "<text x=\"" + detail::svg_num((ml + width - mr) / 2) + "\" y=\"" +
         detail::svg_num(height - 12) +
         "\" font-size=\"13\" text-anchor=\"middle\">sensor noise "
         "sigma_v (log scale)</text>\n";
  svg += "<text x=\"16\" y=\"" + detail::svg_num((mt + height - mb) / 2) +
         "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
         "16 " + detail::svg_num((mt + height - mb) / 2) +
         ")\">cost rate / open-loop rate</text>\n";

  // open-loop reference at 1
  svg += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" +
         detail::svg_num(py(1.0)) + "\" x2=\"" + detail::svg_num(width - mr) +
         "\" y2=\"" + detail::svg_num(py(1.0)) +
         "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";

  struct Series {
    const char* name;
    const char* color;
    double SweepRow::*field;
  };
  const Series series[] = {
      {"SC", "#1f77b4", &SweepRow::j_sc_norm},
      {"OL-MI", "#d62728", &SweepRow::j_irr_ol_norm},
      {"LQG", "#2ca02c", &SweepRow::j_lqg_norm},
  };
  for (const auto& s : series) {
    std::string points;
    for (const auto* r : ok) {
      const double v = r->*(s.field);
      if (!std::isfinite(v)) continue;
      points += detail::svg_num(px(std::log10(r->sigma_v))) + "," +
                detail::svg_num(py(v)) + " ";
    }
    svg += std::string("<polyline fill=\"none\" stroke=\"") + s.color +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    for (const auto* r : ok) {
      const double v = r->*(s.field);
      if (!std::isfinite(v)) continue;
      svg += std::string("<circle cx=\"") +
             detail::svg_num(px(std::log10(r->sigma_v))) + "\" cy=\"" +
             detail::svg_num(py(v)) + "\" r=\"3\" fill=\"" + s.color +
             "\"/>\n";
    }
  }
  // legend
  double ly = mt + 10;
  for (const auto& s : series) {
    svg += std::string("<line x1=\"") + detail::svg_num(width - mr + 15) +
           "\" y1=\"" + detail::svg_num(ly) + "\" x2=\"" +
           detail::svg_num(width - mr + 45) + "\" y2=\"" +
           detail::svg_num(ly) + "\" stroke=\"" + s.color +
           "\" stroke-width=\"2\"/>\n";
    svg += std::string("<text x=\"") + detail::svg_num(width - mr + 52) +
           "\" y=\"" + detail::svg_num(ly + 4) + "\" font-size=\"12\">" +
           s.name + "</text>\n";
    ly += 20;
  }
  svg += std::string("<line x1=\"") + detail::svg_num(width - mr + 15) +
         "\" y1=\"" + detail::svg_num(ly) + "\" x2=\"" +
         detail::svg_num(width - mr + 45) + "\" y2=\"" + detail::svg_num(ly) +
         "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
  svg += std::string("<text x=\"") + detail::svg_num(width - mr + 52) +
         "\" y=\"" + detail::svg_num(ly + 4) +
         "\" font-size=\"12\">open loop</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace trfe
