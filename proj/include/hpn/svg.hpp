#pragma once

// Renders a closed tour as a standalone SVG: city markers, the tour polyline,
// and a caption with the method name and tour length.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpn/tsp.hpp"

namespace hpn {

inline void render_tour_svg(std::ostream& os, const Instance& inst, const std::vector<int>& order,
                            const std::string& title) {
    check_permutation(inst.n(), order, "render_tour_svg");
    const int n = inst.n();
    const double W = 640.0, H = 640.0, margin = 40.0;

    double min_x = inst.coords[0].x, max_x = min_x;
    double min_y = inst.coords[0].y, max_y = min_y;
    for (const auto& p : inst.coords) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double span = std::max(std::max(max_x - min_x, max_y - min_y), 1e-12);
    const double unit = (W - 2.0 * margin) / span;
    auto px = [&](const Point& p) { return margin + (p.x - min_x) * unit; };
    auto py = [&](const Point& p) { return H - margin - (p.y - min_y) * unit; };  // y up

    char buf[160];
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                  "viewBox=\"0 0 %g %g\">\n",
                  W, H, W, H);
    os << buf;
    os << "  <title>" << title << "</title>\n";
    os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    if (n > 1) {
        os << "  <path d=\"";
        for (int i = 0; i < n; ++i) {
            const Point& p = inst.coords[order[i]];
            std::snprintf(buf, sizeof(buf), "%s%.2f %.2f", i == 0 ? "M" : " L", px(p), py(p));
            os << buf;
        }
        os << " Z\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
    }
    for (const auto& p : inst.coords) {
        std::snprintf(buf, sizeof(buf),
                      "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#d62728\"/>\n", px(p),
                      py(p));
        os << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"14\">", margin,
                  H - margin / 2.0);
    os << buf << title << "</text>\n";
    os << "</svg>\n";
}

inline void render_tour_svg(const std::string& path, const Instance& inst,
                            const std::vector<int>& order, const std::string& method) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("render_tour_svg: cannot open '" + path + "'");
    char cap[128];
    std::snprintf(cap, sizeof(cap), "%s, length %.6f", method.c_str(),
                  tour_length(inst, order));
    render_tour_svg(os, inst, order, cap);
    if (!os) throw std::runtime_error("render_tour_svg: write to '" + path + "' failed");
}

}  // namespace hpn
