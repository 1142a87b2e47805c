#pragma once

// TSPLIB NODE_COORD_SECTION ingestion and unit-square normalization.
// One isotropic scale (the larger coordinate range) is used for both axes so
// Euclidean geometry, and therefore tour optimality, is preserved.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpn/tsp.hpp"

namespace hpn {

enum class EdgeWeightType { Euc2D, Ceil2D, Geo, Other };

struct TsplibInstance {
    std::string name;
    int dimension = 0;
    EdgeWeightType edge_weight_type = EdgeWeightType::Other;
    std::string edge_weight_name;
    std::vector<Point> raw_coords;
};

struct NormalizedInstance {
    Instance instance;  // coords in [0,1]^2
    double scale = 1.0;
    Point offset;
};

class TsplibParseError : public std::runtime_error {
  public:
    TsplibParseError(int line, const std::string& msg)
        : std::runtime_error("tsplib: line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Splits "KEYWORD : value" / "KEYWORD: value" / "KEYWORD value"; returns
// false when the line does not start with an uppercase keyword.
inline bool split_keyword(const std::string& line, std::string& key, std::string& value) {
    std::size_t i = 0;
    while (i < line.size() && (std::isupper(static_cast<unsigned char>(line[i])) || line[i] == '_'))
        ++i;
    if (i == 0) return false;
    key = line.substr(0, i);
    std::string rest = trim(line.substr(i));
    if (!rest.empty() && rest[0] == ':') rest = trim(rest.substr(1));
    value = rest;
    return true;
}

inline double parse_number(const std::string& tok, int line_no, const char* what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw TsplibParseError(line_no, std::string("cannot parse ") + what + " '" + tok + "'");
    }
    if (pos != tok.size())
        throw TsplibParseError(line_no, std::string("trailing junk in ") + what + " '" + tok + "'");
    return v;
}

}  // namespace detail

inline TsplibInstance parse_tsplib(std::istream& is) {
    TsplibInstance out;
    bool have_dimension = false;
    bool in_coords = false;
    std::vector<std::pair<long long, Point>> nodes;
    std::string line;
    int line_no = 0;

    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;

        if (!in_coords) {
            std::string key, value;
            if (!detail::split_keyword(t, key, value))
                throw TsplibParseError(line_no, "expected a keyword, got '" + t + "'");
            if (key == "EOF") break;
            if (key == "NAME") {
                out.name = value;
            } else if (key == "DIMENSION") {
                const double d = detail::parse_number(value, line_no, "DIMENSION");
                if (d < 1 || d != static_cast<long long>(d))
                    throw TsplibParseError(line_no, "DIMENSION must be a positive integer");
                out.dimension = static_cast<int>(d);
                have_dimension = true;
            } else if (key == "EDGE_WEIGHT_TYPE") {
                out.edge_weight_name = value;
                if (value == "EUC_2D")
                    out.edge_weight_type = EdgeWeightType::Euc2D;
                else if (value == "CEIL_2D")
                    out.edge_weight_type = EdgeWeightType::Ceil2D;
                else if (value == "GEO")
                    out.edge_weight_type = EdgeWeightType::Geo;
                else
                    out.edge_weight_type = EdgeWeightType::Other;
            } else if (key == "NODE_COORD_SECTION") {
                if (!have_dimension)
                    throw TsplibParseError(line_no, "NODE_COORD_SECTION before DIMENSION");
                in_coords = true;
            }
            // other keywords (TYPE, COMMENT, ...) are tolerated and ignored
            continue;
        }

        if (t == "EOF") break;
        std::istringstream ls(t);
        std::string idx_tok, x_tok, y_tok;
        if (!(ls >> idx_tok >> x_tok >> y_tok))
            throw TsplibParseError(line_no, "expected 'index x y', got '" + t + "'");
        const double idx = detail::parse_number(idx_tok, line_no, "node index");
        if (idx != static_cast<long long>(idx))
            throw TsplibParseError(line_no, "node index must be an integer");
        Point p;
        p.x = detail::parse_number(x_tok, line_no, "x coordinate");
        p.y = detail::parse_number(y_tok, line_no, "y coordinate");
        nodes.emplace_back(static_cast<long long>(idx), p);
        if (static_cast<int>(nodes.size()) == out.dimension) in_coords = false;
    }

    if (!have_dimension) throw TsplibParseError(line_no, "missing DIMENSION keyword");
    if (static_cast<int>(nodes.size()) != out.dimension)
        throw TsplibParseError(line_no, "found " + std::to_string(nodes.size()) +
                                            " coordinates, DIMENSION says " +
                                            std::to_string(out.dimension));

    // indices may be 1-based and arbitrary order
    std::stable_sort(nodes.begin(), nodes.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    out.raw_coords.reserve(nodes.size());
    for (const auto& [idx, p] : nodes) out.raw_coords.push_back(p);
    return out;
}

inline TsplibInstance parse_tsplib(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("tsplib: cannot open '" + path + "'");
    TsplibInstance inst = parse_tsplib(is);
    if (inst.name.empty()) {
        // fall back to the file stem
        std::size_t slash = path.find_last_of("/\\");
        std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
        std::size_t dot = stem.find_last_of('.');
        inst.name = dot == std::string::npos ? stem : stem.substr(0, dot);
    }
    return inst;
}

inline NormalizedInstance normalize(const TsplibInstance& raw) {
    if (raw.raw_coords.empty()) throw std::invalid_argument("normalize: empty instance");
    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    for (const auto& p : raw.raw_coords) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    NormalizedInstance out;
    out.offset = Point{min_x, min_y};
    out.scale = std::max(max_x - min_x, max_y - min_y);
    if (out.scale <= 0.0) out.scale = 1.0;
    out.instance.coords.reserve(raw.raw_coords.size());
    for (const auto& p : raw.raw_coords)
        out.instance.coords.push_back(Point{(p.x - min_x) / out.scale, (p.y - min_y) / out.scale});
    return out;
}

inline Point denormalize_point(const NormalizedInstance& norm, const Point& p) {
    return Point{p.x * norm.scale + norm.offset.x, p.y * norm.scale + norm.offset.y};
}

// Lengths scale linearly under the isotropic affine map.
inline double denormalize_length(const NormalizedInstance& norm, double normalized_length) {
    if (normalized_length < 0.0)
        throw std::invalid_argument("denormalize_length: negative length");
    return normalized_length * norm.scale;
}

}  // namespace hpn
