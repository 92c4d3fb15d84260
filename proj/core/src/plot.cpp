#include "cdekf/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace cdekf {

namespace {

constexpr double kWidth = 860.0;
constexpr double kHeight = 520.0;
constexpr double kMarginLeft = 90.0;
constexpr double kMarginRight = 200.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 70.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;  // finite values only
    bool diverged_everywhere = true;
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

void emit_plot(const std::vector<RunReport>& reports, PlotKind kind, const std::string& path) {
    if (reports.empty()) throw std::invalid_argument("emit_plot requires reports");
    const bool log_x = kind == PlotKind::ArmseVsDeltaIll || kind == PlotKind::ArmseVsLambda;
    const bool cpu = kind == PlotKind::CpuVsDelta;
    const bool log_y = !cpu;

    // Group by variant, preserving first-appearance order.
    std::vector<Series> series;
    std::map<std::string, std::size_t> index;
    std::vector<double> sweep_values;
    for (const auto& r : reports) {
        if (std::find(sweep_values.begin(), sweep_values.end(), r.param) == sweep_values.end()) {
            sweep_values.push_back(r.param);
        }
        if (index.find(r.variant) == index.end()) {
            index[r.variant] = series.size();
            series.push_back(Series{r.variant, {}, true});
        }
        Series& s = series[index[r.variant]];
        const double y = cpu ? r.mean_cpu_seconds : r.armse;
        if (std::isfinite(y)) {
            s.points.emplace_back(r.param, y);
            s.diverged_everywhere = false;
        }
    }

    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };

    double x_min = tx(sweep_values.front()), x_max = x_min;
    for (double v : sweep_values) {
        x_min = std::min(x_min, tx(v));
        x_max = std::max(x_max, tx(v));
    }
    double y_min = 0.0, y_max = 1.0;
    bool have_y = false;
    for (const auto& s : series) {
        for (const auto& [px, py] : s.points) {
            const double v = ty(py);
            if (!have_y) {
                y_min = y_max = v;
                have_y = true;
            } else {
                y_min = std::min(y_min, v);
                y_max = std::max(y_max, v);
            }
        }
    }
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max == y_min) {
        y_min -= 0.5;
        y_max += 0.5;
    }

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto px = [&](double v) {
        return kMarginLeft + (tx(v) - x_min) / (x_max - x_min) * plot_w;
    };
    auto py = [&](double v) {
        return kMarginTop + plot_h - (ty(v) - y_min) / (y_max - y_min) * plot_h;
    };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";

    const char* titles[] = {"ARMSE vs sampling period", "ARMSE vs ill-conditioning delta",
                            "ARMSE vs stiffness lambda", "mean wall time vs sampling period"};
    out << "<text x=\"" << kMarginLeft << "\" y=\"" << (kMarginTop - 12)
        << "\" font-family=\"sans-serif\" font-size=\"16\">"
        << titles[static_cast<int>(kind)] << "</text>\n";

    // One x tick per swept value.
    for (double v : sweep_values) {
        const double x = px(v);
        out << "<line x1=\"" << x << "\" y1=\"" << (kMarginTop + plot_h) << "\" x2=\"" << x
            << "\" y2=\"" << (kMarginTop + plot_h + 6) << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << (kMarginTop + plot_h + 22)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt(v)
            << "</text>\n";
    }
    // Five y ticks across the data range.
    for (int i = 0; i <= 4; ++i) {
        const double frac = static_cast<double>(i) / 4.0;
        const double yv = y_min + frac * (y_max - y_min);
        const double y = kMarginTop + plot_h - frac * plot_h;
        const double label = log_y ? std::pow(10.0, yv) : yv;
        out << "<line x1=\"" << (kMarginLeft - 6) << "\" y1=\"" << y << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << y << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << (kMarginLeft - 10) << "\" y=\"" << (y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << fmt(label) << "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        // Consecutive sweep values present in the series form segments;
        // missing (diverged) values break the polyline.
        std::vector<std::pair<double, double>> segment;
        auto flush = [&] {
            if (segment.size() >= 2) {
                out << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"1.5\" points=\"";
                for (const auto& [vx, vy] : segment) out << px(vx) << "," << py(vy) << " ";
                out << "\"/>\n";
            }
            segment.clear();
        };
        for (double v : sweep_values) {
            auto it = std::find_if(s.points.begin(), s.points.end(),
                                   [&](const auto& p) { return p.first == v; });
            if (it == s.points.end()) {
                flush();
            } else {
                segment.push_back(*it);
            }
        }
        flush();
        for (const auto& [vx, vy] : s.points) {
            out << "<circle class=\"mark\" cx=\"" << px(vx) << "\" cy=\"" << py(vy)
                << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
        }
        const double ly = kMarginTop + 16.0 + 18.0 * static_cast<double>(si);
        out << "<rect x=\"" << (kWidth - kMarginRight + 14) << "\" y=\"" << (ly - 9)
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << (kWidth - kMarginRight + 32) << "\" y=\"" << (ly + 1)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name
            << (s.diverged_everywhere ? " (diverged)" : "") << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace cdekf
