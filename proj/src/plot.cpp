#include "ilseg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ilseg {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
}

}  // namespace

std::string likelihood_svg(const LikelihoodModel& m) {
    constexpr double W = 800, H = 500;
    constexpr double ml = 70, mr = 70, mt = 40, mb = 60;
    const double pw = W - ml - mr, ph = H - mt - mb;

    auto grid = m.support_grid();
    const double x_lo = grid.front() + m.shift, x_hi = grid.back() + m.shift;
    double w_max = 0.0;
    for (double w : m.bin_weights) w_max = std::max(w_max, w);
    if (w_max <= 0.0) w_max = 1.0;

    auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto sy_count = [&](double c) { return mt + ph - c / w_max * ph; };
    auto sy_like = [&](double p) { return mt + ph - p * ph; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" +
           num(H) + "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Histogram bars (left axis).
    const double bar_w = std::max(1.0, pw / static_cast<double>(grid.size()));
    svg += "<g fill=\"#2ca02c\" fill-opacity=\"0.55\">\n";
    for (size_t i = 0; i < m.bin_centers.size(); ++i) {
        if (m.bin_weights[i] <= 0.0) continue;
        double cx = sx(m.bin_centers[i] + m.shift);
        double top = sy_count(m.bin_weights[i]);
        svg += "<rect x=\"" + num(cx - bar_w / 2) + "\" y=\"" + num(top) + "\" width=\"" +
               num(bar_w) + "\" height=\"" + num(mt + ph - top) + "\"/>\n";
    }
    svg += "</g>\n";

    // Likelihood curve (right axis) and its maximum.
    double best_val = -1.0, best_x = x_lo;
    std::string points;
    for (double g : grid) {
        double x = g + m.shift;
        double v = m.evaluate(x);
        if (v > best_val) {
            best_val = v;
            best_x = x;
        }
        points += num(sx(x)) + "," + num(sy_like(v)) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + points +
           "\"/>\n";
    svg += "<circle cx=\"" + num(sx(best_x)) + "\" cy=\"" + num(sy_like(best_val)) +
           "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    svg += "<text x=\"" + num(sx(best_x) + 8) + "\" y=\"" + num(sy_like(best_val) - 8) +
           "\" font-size=\"14\" fill=\"#1f77b4\">max=" + format_fixed(best_val, 1) + "</text>\n";

    // Axes.
    svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(ml + pw) +
           "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) + "\" y2=\"" +
           num(mt + ph) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(ml + pw) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml + pw) +
           "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(H - 15) +
           "\" font-size=\"15\" text-anchor=\"middle\">Intensity (HU)</text>\n";
    svg += "<text x=\"18\" y=\"" + num(mt + ph / 2) +
           "\" font-size=\"15\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           num(mt + ph / 2) + ")\">Sample count</text>\n";
    svg += "<text x=\"" + num(W - 18) + "\" y=\"" + num(mt + ph / 2) +
           "\" font-size=\"15\" text-anchor=\"middle\" transform=\"rotate(90 " + num(W - 18) +
           " " + num(mt + ph / 2) + ")\">Likelihood</text>\n";

    // Tick labels: x extremes, left count max, right 0 and 1.
    svg += "<text x=\"" + num(ml) + "\" y=\"" + num(mt + ph + 20) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + num(x_lo) + "</text>\n";
    svg += "<text x=\"" + num(ml + pw) + "\" y=\"" + num(mt + ph + 20) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + num(x_hi) + "</text>\n";
    svg += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(mt + 5) +
           "\" font-size=\"12\" text-anchor=\"end\">" + num(w_max) + "</text>\n";
    svg += "<text x=\"" + num(ml + pw + 8) + "\" y=\"" + num(mt + 5) +
           "\" font-size=\"12\">1.0</text>\n";
    svg += "<text x=\"" + num(ml + pw + 8) + "\" y=\"" + num(mt + ph) +
           "\" font-size=\"12\">0.0</text>\n";
    svg += "</svg>\n";
    return svg;
}

void write_likelihood_svg(const LikelihoodModel& m, const std::string& path) {
    write_file_text(path, likelihood_svg(m));
}

}  // namespace ilseg
