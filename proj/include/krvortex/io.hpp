#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "critical_finder.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "harmonic.hpp"
#include "kirchhoff_routh.hpp"
#include "steady.hpp"

namespace krv::io {

using json = nlohmann::json;

/// Configuration document that cannot be read or does not have the expected shape.
class ConfigError : public InputError {
  public:
    using InputError::InputError;
};

inline json parse_json(const std::string &text, const std::string &origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

inline json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), path.string());
}

// ---------------------------------------------------------------------------
// typed access with readable errors

inline const json &require(const json &j, const std::string &key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing field '" + key + "'");
    return j.at(key);
}

inline double as_real(const json &j, const std::string &what) {
    if (!j.is_number()) throw ConfigError("'" + what + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError("'" + what + "' must be finite");
    return v;
}

inline long long as_int(const json &j, const std::string &what) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError("'" + what + "' must be an integer");
    return j.get<long long>();
}

inline double real_or(const json &j, const std::string &key, double fallback) {
    return j.is_object() && j.contains(key) ? as_real(j.at(key), key) : fallback;
}

inline long long int_or(const json &j, const std::string &key, long long fallback) {
    return j.is_object() && j.contains(key) ? as_int(j.at(key), key) : fallback;
}

inline Point2 as_point(const json &j, const std::string &what) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("'" + what + "' must be a pair [x1, x2]");
    return {as_real(j[0], what), as_real(j[1], what)};
}

inline std::vector<Point2> as_points(const json &j, const std::string &what) {
    if (!j.is_array()) throw ConfigError("'" + what + "' must be an array of [x1, x2] pairs");
    std::vector<Point2> out;
    for (const auto &e : j) out.push_back(as_point(e, what));
    return out;
}

inline std::vector<double> as_reals(const json &j, const std::string &what) {
    if (!j.is_array()) throw ConfigError("'" + what + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto &e : j) out.push_back(as_real(e, what));
    return out;
}

// ---------------------------------------------------------------------------
// domain, psi0, configurations

/// {"variant": "unit_disk"}
/// {"variant": "scaled_disk", "radius": r, "center": [c1, c2]}
/// {"variant": "conformal", "coefficients": [[re, im], ...]}
/// {"variant": "numeric", "boundary": [[x1, x2], ...], "charge_offset": s, "charges": n}
/// {"variant": "numeric", "ellipse": {"a": a, "b": b, "points": m, "center": [c1, c2]}, ...}
inline DomainModel parse_domain(const json &j) {
    if (!j.is_object()) throw ConfigError("'domain' must be an object");
    const auto &v = require(j, "variant");
    if (!v.is_string()) throw ConfigError("'variant' must be a string");
    const std::string variant = v.get<std::string>();
    if (variant == "unit_disk") return DomainModel::unit_disk();
    if (variant == "scaled_disk")
        return DomainModel::scaled_disk(as_real(require(j, "radius"), "radius"),
                                        j.contains("center") ? as_point(j.at("center"), "center") : Point2{});
    if (variant == "conformal") {
        const auto &c = require(j, "coefficients");
        if (!c.is_array()) throw ConfigError("'coefficients' must be an array of [re, im] pairs");
        std::vector<Complex> coef;
        for (const auto &p : c) {
            const Point2 z = as_point(p, "coefficients");
            coef.emplace_back(z.x1, z.x2);
        }
        return DomainModel::conformal(std::move(coef));
    }
    if (variant == "numeric") {
        std::vector<Point2> boundary;
        if (j.contains("ellipse")) {
            const auto &e = j.at("ellipse");
            boundary = ellipse_boundary(as_real(require(e, "a"), "a"), as_real(require(e, "b"), "b"),
                                        static_cast<int>(int_or(e, "points", 400)),
                                        e.contains("center") ? as_point(e.at("center"), "center") : Point2{});
        } else {
            boundary = as_points(require(j, "boundary"), "boundary");
        }
        return DomainModel::numeric(std::move(boundary), real_or(j, "charge_offset", 0.04),
                                    static_cast<int>(int_or(j, "charges", 0)));
    }
    throw ConfigError("unknown domain variant '" + variant + "'");
}

/// Outward unit normal at (or next to) a boundary point, from the boundary sample nearest to x.
inline Vec2 outward_normal(const DomainModel &d, const Point2 &x) {
    if (const auto *dd = d.as_disk()) return (x - dd->center) / distance(x, dd->center);
    if (const auto *cd = d.as_conformal()) {
        const auto &b = cd->map.boundary();
        std::size_t best = 0;
        for (std::size_t j = 1; j < b.size(); ++j)
            if (norm2(b[j] - x) < norm2(b[best] - x)) best = j;
        const Complex w = std::polar(1.0, 2.0 * pi * static_cast<double>(best) / static_cast<double>(b.size()));
        const Complex n = w * cd->map.derivative(w);
        return to_vec(n / std::abs(n));
    }
    const auto &nd = *d.as_numeric();
    std::size_t best = 0;
    for (std::size_t j = 1; j < nd.nodes.size(); ++j)
        if (norm2(nd.nodes[j] - x) < norm2(nd.nodes[best] - x)) best = j;
    return perp(nd.tangents[best]);
}

/// Boundary flux for psi0:
/// {"kind": "zero"}; {"kind": "uniform", "velocity": [u1, u2]} (flux u . n, psi0 = u1 x2 - u2 x1 + const);
/// {"kind": "angular", "cos": [...], "sin": [...]} (flux sum c_m cos m t + s_m sin m t, t the
/// polar angle about the domain centroid, m from 1).
inline HarmonicField parse_psi0(const DomainModel &d, const json &j) {
    if (j.is_null()) return HarmonicField::zero();
    if (!j.is_object()) throw ConfigError("'psi0' must be an object");
    const std::string kind = j.contains("kind") && j.at("kind").is_string() ? j.at("kind").get<std::string>() : "";
    if (kind == "zero") return HarmonicField::zero();
    if (kind == "uniform") {
        const Point2 u = as_point(require(j, "velocity"), "velocity");
        if (u.x1 == 0.0 && u.x2 == 0.0) return HarmonicField::zero();
        return solve_psi0(d, {[u, d](const Point2 &x) { return dot(Vec2{u.x1, u.x2}, outward_normal(d, x)); }});
    }
    if (kind == "angular") {
        const auto c = j.contains("cos") ? as_reals(j.at("cos"), "cos") : std::vector<double>{};
        const auto s = j.contains("sin") ? as_reals(j.at("sin"), "sin") : std::vector<double>{};
        const Point2 o = d.centroid();
        return solve_psi0(d, {[c, s, o](const Point2 &x) {
                              const double t = std::atan2(x.x2 - o.x2, x.x1 - o.x1);
                              double g = 0.0;
                              for (std::size_t m = 0; m < c.size(); ++m) g += c[m] * std::cos((m + 1.0) * t);
                              for (std::size_t m = 0; m < s.size(); ++m) g += s[m] * std::sin((m + 1.0) * t);
                              return g;
                          }});
    }
    throw ConfigError("psi0 'kind' must be one of zero, uniform, angular");
}

/// [{"point": [x1, x2], "kappa": k}, ...]
inline VortexConfiguration parse_configuration(const json &j) {
    if (!j.is_array() || j.empty()) throw ConfigError("'configuration' must be a non-empty array");
    VortexConfiguration c;
    for (const auto &e : j) {
        c.points.push_back(as_point(require(e, "point"), "point"));
        c.circulations.push_back(as_real(require(e, "kappa"), "kappa"));
    }
    return c;
}

inline json to_json(const VortexConfiguration &c) {
    json a = json::array();
    for (std::size_t i = 0; i < c.size(); ++i)
        a.push_back({{"point", {c.points[i].x1, c.points[i].x2}}, {"kappa", c.circulations[i]}});
    return a;
}

inline SearchConfig parse_search(const json &j, SearchConfig sc = {}) {
    if (j.is_null()) return sc;
    if (!j.is_object()) throw ConfigError("'search' must be an object");
    sc.starts = static_cast<int>(int_or(j, "starts", sc.starts));
    sc.newton_tol = real_or(j, "newton_tol", sc.newton_tol);
    sc.max_iter = static_cast<int>(int_or(j, "max_iter", sc.max_iter));
    sc.dedup_radius = real_or(j, "dedup_radius", sc.dedup_radius);
    sc.delta0 = real_or(j, "delta0", sc.delta0);
    sc.interior_margin = real_or(j, "interior_margin", sc.interior_margin);
    return sc;
}

inline json to_json(const CriticalPoint &p) {
    return {{"configuration", to_json(p.configuration)},
            {"gradient_norm", p.gradient_norm},
            {"value", p.value},
            {"classification", to_string(p.classification)},
            {"hessian_eigenvalues", p.hessian_eigenvalues},
            {"symmetry_modes", p.symmetry_modes}};
}

// ---------------------------------------------------------------------------
// CSV

/// 17 significant digits, always enough to round-trip a double.
inline std::string fmt(double v) {
    if (v == 0.0) return "0"; // no negative zero
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Builds a CSV document in memory. If the producer fails after rows were
/// added, finish(false) appends the marker line "# INCOMPLETE".
class CsvWriter {
  public:
    explicit CsvWriter(const std::vector<std::string> &header) {
        for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
        text_ += '\n';
        columns_ = header.size();
    }
    template <class... T>
    void row(const T &...cells) {
        std::string line;
        std::size_t n = 0;
        ((line += (n++ ? "," : "") + cell(cells)), ...);
        if (n != columns_) throw std::logic_error("csv row width mismatch");
        text_ += line + '\n';
    }
    void row(const std::vector<std::string> &cells) {
        if (cells.size() != columns_) throw std::logic_error("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
        text_ += '\n';
    }
    std::string finish(bool complete) const { return complete ? text_ : text_ + "# INCOMPLETE\n"; }

    static std::string cell(double v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(long long v) { return std::to_string(v); }
    static std::string cell(unsigned long v) { return std::to_string(v); }
    static std::string cell(unsigned long long v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    static std::string cell(const std::string &v) {
        if (v.find_first_of(",\"\n") == std::string::npos) return v;
        std::string q = "\"";
        for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    static std::string cell(const char *v) { return cell(std::string(v)); }

  private:
    std::string text_;
    std::size_t columns_ = 0;
};

// ---------------------------------------------------------------------------
// files

/// Writes through a temporary sibling and renames, so readers never see a torn file.
inline void write_atomic(const std::filesystem::path &path, const std::string &bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SolverFailure("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw SolverFailure("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

/// Flat field dump: 4 doubles (box lo.x1, lo.x2, hi.x1, hi.x2), 2 int64 (n1, n2),
/// n1*n2 doubles row by row (x1 fastest), then n1*n2 mask bytes. Native byte order.
inline std::string field_bytes(const GridField &f) {
    std::string out;
    auto put = [&out](const void *p, std::size_t n) { out.append(static_cast<const char *>(p), n); };
    const double box[4] = {f.box().lo.x1, f.box().lo.x2, f.box().hi.x1, f.box().hi.x2};
    const std::int64_t n[2] = {f.n1(), f.n2()};
    put(box, sizeof box);
    put(n, sizeof n);
    put(f.values().data(), f.values().size() * sizeof(double));
    put(f.mask().data(), f.mask().size());
    return out;
}

inline GridField read_field(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open field " + path.string());
    double box[4];
    std::int64_t n[2];
    in.read(reinterpret_cast<char *>(box), sizeof box);
    in.read(reinterpret_cast<char *>(n), sizeof n);
    if (!in || n[0] <= 0 || n[1] <= 0 || n[0] > 1 << 15 || n[1] > 1 << 15)
        throw ConfigError("bad field header in " + path.string());
    GridField f({{box[0], box[1]}, {box[2], box[3]}}, static_cast<int>(n[0]), static_cast<int>(n[1]));
    std::vector<double> v(f.size());
    std::vector<std::uint8_t> m(f.size());
    in.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    in.read(reinterpret_cast<char *>(m.data()), static_cast<std::streamsize>(m.size()));
    if (!in) throw ConfigError("truncated field " + path.string());
    for (std::size_t k = 0; k < f.size(); ++k) {
        f.set_active(k, m[k] != 0);
        if (v[k] != 0.0) {
            if (!m[k]) throw ConfigError("field value outside its mask in " + path.string());
            f.set(k, v[k]);
        }
    }
    return f;
}

/// Record of one run, written last.
struct RunManifest {
    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string version;
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;
    int exit_code = 0;
    std::string status;

    json to_json() const {
        return {{"subcommand", subcommand}, {"config", config_path}, {"out_dir", out_dir},
                {"seed", seed},             {"version", version},    {"wall_seconds", wall_seconds},
                {"outputs", outputs},       {"exit_code", exit_code}, {"status", status}};
    }
};

} // namespace krv::io
