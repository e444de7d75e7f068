#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chimera/math.hpp"

namespace chimera::io {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Column-oriented CSV table; every experiment output goes through this so
/// formatting (and therefore byte-level reproducibility) is uniform.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    void write(std::ostream& os) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            os << (i ? "," : "") << header[i];
        os << '\n';
        const std::size_t rows = columns.empty() ? 0 : columns[0].size();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < columns.size(); ++c)
                os << (c ? "," : "") << fmt_double(columns[c][r]);
            os << '\n';
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary);
        require(f.good(), "CsvTable: cannot open " + path.string());
        write(f);
    }
};

inline void save_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "save_json: cannot open " + path.string());
    f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Minimal SVG scatter/line plots; enough for the diagram and sweep figures.
// ---------------------------------------------------------------------------

struct SvgSeries {
    std::vector<double> x, y;
    std::string color = "#1f6fb2";
    bool line = true;
    bool markers = false;
};

struct SvgPlot {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<SvgSeries> series;
    // Reference guide lines y = c * x^slope (drawn dashed, log-log plots).
    struct Guide {
        double slope, anchor_x, anchor_y;
        std::string label;
    };
    std::vector<Guide> guides;

    void save(const std::filesystem::path& path) const {
        const double W = 640, H = 480, L = 70, R = 20, T = 36, B = 50;
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        auto tx = [&](double v) { return logx ? std::log10(v) : v; };
        auto ty = [&](double v) { return logy ? std::log10(v) : v; };
        for (const auto& s : series)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                xmin = std::min(xmin, tx(s.x[i]));
                xmax = std::max(xmax, tx(s.x[i]));
                ymin = std::min(ymin, ty(s.y[i]));
                ymax = std::max(ymax, ty(s.y[i]));
            }
        if (!(xmax > xmin)) xmax = xmin + 1;
        if (!(ymax > ymin)) ymax = ymin + 1;
        const double padx = 0.05 * (xmax - xmin), pady = 0.08 * (ymax - ymin);
        xmin -= padx;
        xmax += padx;
        ymin -= pady;
        ymax += pady;
        auto px = [&](double v) { return L + (tx(v) - xmin) / (xmax - xmin) * (W - L - R); };
        auto py = [&](double v) { return H - B - (ty(v) - ymin) / (ymax - ymin) * (H - T - B); };

        std::ofstream f(path, std::ios::binary);
        require(f.good(), "SvgPlot: cannot open " + path.string());
        f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
          << "' viewBox='0 0 " << W << ' ' << H << "'>\n"
          << "<rect width='100%' height='100%' fill='white'/>\n";
        // Axes box and tick labels.
        f << "<rect x='" << L << "' y='" << T << "' width='" << W - L - R << "' height='"
          << H - T - B << "' fill='none' stroke='black'/>\n";
        for (int i = 0; i <= 5; ++i) {
            const double fx = xmin + (xmax - xmin) * i / 5.0;
            const double fy = ymin + (ymax - ymin) * i / 5.0;
            const double gx = L + (W - L - R) * i / 5.0;
            const double gy = H - B - (H - T - B) * i / 5.0;
            char lx[32], ly[32];
            std::snprintf(lx, sizeof lx, "%.3g", logx ? std::pow(10.0, fx) : fx);
            std::snprintf(ly, sizeof ly, "%.3g", logy ? std::pow(10.0, fy) : fy);
            f << "<text x='" << gx << "' y='" << H - B + 16
              << "' font-size='11' text-anchor='middle'>" << lx << "</text>\n"
              << "<text x='" << L - 6 << "' y='" << gy + 4
              << "' font-size='11' text-anchor='end'>" << ly << "</text>\n"
              << "<line x1='" << gx << "' y1='" << H - B << "' x2='" << gx << "' y2='"
              << H - B + 4 << "' stroke='black'/>\n"
              << "<line x1='" << L - 4 << "' y1='" << gy << "' x2='" << L << "' y2='" << gy
              << "' stroke='black'/>\n";
        }
        f << "<text x='" << (L + W - R) / 2 << "' y='" << H - 14
          << "' font-size='13' text-anchor='middle'>" << xlabel << "</text>\n"
          << "<text x='16' y='" << (T + H - B) / 2
          << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 "
          << (T + H - B) / 2 << ")'>" << ylabel << "</text>\n"
          << "<text x='" << (L + W - R) / 2 << "' y='20' font-size='14' text-anchor='middle'>"
          << title << "</text>\n";
        for (const auto& g : guides) {
            // y = anchor_y * (x/anchor_x)^slope across the visible x-range.
            const double x0 = logx ? std::pow(10.0, xmin) : xmin;
            const double x1 = logx ? std::pow(10.0, xmax) : xmax;
            const double y0 = g.anchor_y * std::pow(x0 / g.anchor_x, g.slope);
            const double y1 = g.anchor_y * std::pow(x1 / g.anchor_x, g.slope);
            f << "<line x1='" << px(x0) << "' y1='" << py(y0) << "' x2='" << px(x1) << "' y2='"
              << py(y1) << "' stroke='gray' stroke-dasharray='6 4'/>\n"
              << "<text x='" << px(x1) - 40 << "' y='" << py(y1) - 6 << "' font-size='12'>"
              << g.label << "</text>\n";
        }
        for (const auto& s : series) {
            if (s.line && s.x.size() > 1) {
                f << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    f << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
                f << "'/>\n";
            }
            if (s.markers || !s.line)
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    f << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
                      << "' r='2.5' fill='" << s.color << "'/>\n";
        }
        f << "</svg>\n";
    }
};

}  // namespace chimera::io
