#include "ssmimpute/svg.hpp"

#include "ssmimpute/errors.hpp"
#include "ssmimpute/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ssmimpute {

namespace {

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
}

std::string num(double v) { return fmt_double(v); }

}  // namespace

void write_boxplot_svg(const std::string& path, const std::string& title,
                       const std::vector<BoxplotGroup>& groups, const double* reference) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");

    const double W = 120.0 * std::max<std::size_t>(1, groups.size()) + 80.0;
    const double H = 360.0;
    const double top = 40.0, bottom = 40.0, left = 60.0;

    double lo = reference ? *reference : 0.0, hi = reference ? *reference : 0.0;
    bool any = false;
    for (const auto& g : groups)
        for (double v : g.values) {
            if (!any) {
                lo = hi = v;
                any = true;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!any) {
        lo = -1.0;
        hi = 1.0;
    }
    if (reference) {
        lo = std::min(lo, *reference);
        hi = std::max(hi, *reference);
    }
    const double pad = 0.05 * (hi - lo + 1e-12);
    lo -= pad;
    hi += pad;
    auto ypix = [&](double v) { return top + (H - top - bottom) * (hi - v) / (hi - lo); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\""
        << num(H) << "\">\n";
    out << "<text x=\"" << num(W / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(ypix(lo)) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(ypix(hi)) << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + k * (hi - lo) / 4.0;
        out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(ypix(v) + 4)
            << "\" text-anchor=\"end\" font-size=\"10\">" << num(v) << "</text>\n";
    }
    if (reference)
        out << "<line x1=\"" << num(left) << "\" y1=\"" << num(ypix(*reference)) << "\" x2=\""
            << num(W - 10) << "\" y2=\"" << num(ypix(*reference))
            << "\" stroke=\"red\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        const double cx = left + 60.0 + 120.0 * static_cast<double>(i);
        out << "<text x=\"" << num(cx) << "\" y=\"" << num(H - 14)
            << "\" text-anchor=\"middle\" font-size=\"11\">" << g.label << "</text>\n";
        if (g.values.empty()) continue;
        const double q1 = quantile(g.values, 0.25);
        const double q2 = quantile(g.values, 0.50);
        const double q3 = quantile(g.values, 0.75);
        const double wlo = *std::min_element(g.values.begin(), g.values.end());
        const double whi = *std::max_element(g.values.begin(), g.values.end());
        const double bw = 40.0;
        out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(ypix(wlo)) << "\" x2=\"" << num(cx)
            << "\" y2=\"" << num(ypix(whi)) << "\" stroke=\"black\"/>\n";
        out << "<rect x=\"" << num(cx - bw / 2) << "\" y=\"" << num(ypix(q3)) << "\" width=\""
            << num(bw) << "\" height=\"" << num(std::max(1.0, ypix(q1) - ypix(q3)))
            << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << num(cx - bw / 2) << "\" y1=\"" << num(ypix(q2)) << "\" x2=\""
            << num(cx + bw / 2) << "\" y2=\"" << num(ypix(q2))
            << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
    out << "</svg>\n";
}

void write_paths_svg(const std::string& path, const ImputationResult& res) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");

    const int T = res.eval_length;
    const int n = static_cast<int>(res.coef_names.size());
    const double panel_h = 140.0, panel_w = 640.0, left = 70.0, gap = 30.0;
    const double W = left + panel_w + 20.0;
    const double H = 30.0 + n * (panel_h + gap);

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\""
        << num(H) << "\">\n";
    for (int j = 0; j < n; ++j) {
        const double y0 = 30.0 + j * (panel_h + gap);
        double lo = res.pooled.lo90.col(j).minCoeff();
        double hi = res.pooled.hi90.col(j).maxCoeff();
        const double pad = 0.05 * (hi - lo + 1e-12);
        lo -= pad;
        hi += pad;
        auto xp = [&](int t) { return left + panel_w * static_cast<double>(t) / std::max(1, T - 1); };
        auto yp = [&](double v) { return y0 + panel_h * (hi - v) / (hi - lo); };

        out << "<text x=\"" << num(left) << "\" y=\"" << num(y0 - 6) << "\" font-size=\"12\">"
            << res.coef_names[static_cast<std::size_t>(j)] << "</text>\n";

        auto polyline = [&](const Eigen::MatrixXd& m, const char* color, const char* dash) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\"";
            if (dash[0]) out << " stroke-dasharray=\"" << dash << "\"";
            out << " points=\"";
            for (int t = 0; t < T; ++t) out << num(xp(t)) << "," << num(yp(m(t, j))) << " ";
            out << "\"/>\n";
        };
        polyline(res.pooled.lo90, "#bbbbbb", "3 3");
        polyline(res.pooled.hi90, "#bbbbbb", "3 3");
        polyline(res.pooled.mean, "black", "");

        const auto it = res.change_points.find(res.coef_names[static_cast<std::size_t>(j)]);
        if (it != res.change_points.end())
            for (int c : it->second)
                out << "<line x1=\"" << num(xp(c - 1)) << "\" y1=\"" << num(y0) << "\" x2=\""
                    << num(xp(c - 1)) << "\" y2=\"" << num(y0 + panel_h)
                    << "\" stroke=\"red\" stroke-dasharray=\"2 2\"/>\n";
    }
    out << "</svg>\n";
}

}  // namespace ssmimpute
