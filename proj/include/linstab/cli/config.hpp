#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "linstab/errors.hpp"
#include "linstab/grid.hpp"
#include "linstab/weight.hpp"

namespace linstab::cli {

using nlohmann::json;

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{
        "interp-check",      "seq-counterexample", "xray-selftest",
        "ellipticity",       "stability-sweep",    "perturbation-scan",
        "coherent-probe",    "holder-fit",         "findim-check"};
    return names;
}

struct RaysConfig {
    std::string mode = "fixed";  // "fixed" or "scaled" (angles and offsets follow the grid)
    int n_angles = 90;
    int n_offsets = 90;
    std::optional<double> t_step;  // unset: h / 2
    double oversampling = 4.0;
};

struct HolderConfig {
    double K = 10.0;
    std::vector<double> scales{1e-1, 1e-2, 1e-3, 1e-4};
    int samples = 8;
    double mu1 = 1.0;
    double mu2 = 0.75;
    double f1_amplitude = 0.0;  // nonzero: centre the fit at a small packet f1
    bool weakest_direction = false;
    std::vector<int> resolutions;  // nonempty: repeat the fit per resolution
    std::string expect = "holds";  // or "degenerates": C_hat must grow across resolutions
};

struct ProbeConfig {
    Vec2 x0{0.2, 0.0};
    Vec2 xi0{1.0, 0.0};
    std::string mode = "refined";  // "refined" or "matrix"
    double lambda3_h2 = 65.0;
    double oversampling = 1.0;
    bool rotate = true;
    double tolerance = 0.10;
    double isotropy = 0.02;
};

struct FindimConfig {
    int maps = 10;
    int n = 3;
    int m = 4;
    int samples = 1000;
    double sigma_lo = 0.5;
};

struct ExperimentConfig {
    std::string experiment;
    double L = 4.0;
    int N = 32;
    json weight;
    RaysConfig rays;
    std::vector<double> sobolev_orders{0.0, 1.0, 2.0};
    std::vector<double> lambdas{25.0, 50.0, 100.0, 200.0};
    HolderConfig holder;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    int seq_M = 50;
    int trials = 100;
    std::vector<int> resolutions{16, 24, 32};
    std::string stability_expect = "none";  // "stable", "unstable" or "none"
    json perturbation_delta;
    std::vector<double> eps{0.01, 0.05, 0.1};
    ProbeConfig probe;
    int ellipticity_density = 32;
    FindimConfig findim;
    json echo;  // the full configuration with defaults filled in
};

/// Builds a weight from {"kind": ..., "params": {...}}; tabulated weights are
/// sampled on `grid`.
inline WeightSpec make_weight(const json& spec, const Grid& grid);

namespace detail {

class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& msg) {
        errors.push_back(path.empty() ? msg : path + ": " + msg);
    }

    bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
        if (!j.is_object()) {
            fail(path, "must be an object");
            return false;
        }
        std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& [k, v] : j.items()) {
            if (!known.count(k)) fail(join(path, k), "unknown key");
        }
        return true;
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    double number(const json& j, const std::string& path, const char* key, double fallback,
                  const std::function<bool(double)>& ok = {}, const char* rule = "") {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        if (!v.is_number()) {
            fail(join(path, key), "must be a number");
            return fallback;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x) || (ok && !ok(x))) {
            fail(join(path, key), std::string("must be ") + rule);
            return fallback;
        }
        return x;
    }

    int integer(const json& j, const std::string& path, const char* key, int fallback,
                const std::function<bool(long long)>& ok = {}, const char* rule = "") {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        if (!v.is_number_integer()) {
            fail(join(path, key), "must be an integer");
            return fallback;
        }
        const long long x = v.get<long long>();
        if (x > 1'000'000'000 || x < -1'000'000'000 || (ok && !ok(x))) {
            fail(join(path, key), std::string("must be ") + rule);
            return fallback;
        }
        return static_cast<int>(x);
    }

    bool boolean(const json& j, const std::string& path, const char* key, bool fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_boolean()) {
            fail(join(path, key), "must be true or false");
            return fallback;
        }
        return j.at(key).get<bool>();
    }

    std::string string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback, const std::vector<std::string>& allowed = {}) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_string()) {
            fail(join(path, key), "must be a string");
            return fallback;
        }
        auto s = j.at(key).get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(join(path, key), "unknown value \"" + s + "\" (expected one of " + list + ")");
            return fallback;
        }
        return s;
    }

    std::vector<double> numbers(const json& j, const std::string& path, const char* key,
                                std::vector<double> fallback,
                                const std::function<bool(double)>& ok = {}, const char* rule = "") {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        if (!v.is_array() || v.empty()) {
            fail(join(path, key), "must be a nonempty array of numbers");
            return fallback;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>()) ||
                (ok && !ok(v[i].get<double>()))) {
                fail(join(path, key) + "[" + std::to_string(i) + "]",
                     std::string("must be a number") + (ok ? std::string(" ") + rule : ""));
                return fallback;
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<int> integers(const json& j, const std::string& path, const char* key,
                              std::vector<int> fallback) {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        if (!v.is_array() || v.empty()) {
            fail(join(path, key), "must be a nonempty array of integers");
            return fallback;
        }
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer() || v[i].get<long long>() < 8 ||
                v[i].get<long long>() % 2 != 0 || v[i].get<long long>() > 4096) {
                fail(join(path, key) + "[" + std::to_string(i) + "]", "must be an even grid size in [8, 4096]");
                return fallback;
            }
            out.push_back(v[i].get<int>());
        }
        return out;
    }

    Vec2 point(const json& j, const std::string& path, const char* key, Vec2 fallback) {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            fail(join(path, key), "must be a pair of numbers");
            return fallback;
        }
        return {v[0].get<double>(), v[1].get<double>()};
    }
};

inline bool increasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1])) return false;
    return true;
}

inline bool decreasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1])) return false;
    return true;
}

inline json vec_json(Vec2 v) { return json::array({v.x1, v.x2}); }

// Normalised weight object: kind plus every parameter with its default.
inline json read_weight(Reader& r, const json& j, const std::string& path, const Grid* grid) {
    if (!r.object(j, path, {"kind", "params"})) return json();
    static const std::vector<std::string> kinds{"constant", "limited_angle", "tabulated", "bump"};
    if (!j.contains("kind")) {
        r.fail(Reader::join(path, "kind"), "required");
        return json();
    }
    const std::size_t before = r.errors.size();
    const std::string kind = r.string(j, path, "kind", "", kinds);
    if (r.errors.size() != before) return json();
    const json params = j.contains("params") ? j.at("params") : json::object();
    const std::string pp = Reader::join(path, "params");
    json out{{"kind", kind}};
    auto positive = [](double x) { return x > 0.0; };
    if (kind == "constant") {
        if (!r.object(params, pp, {"c0"})) return json();
        out["params"] = {{"c0", r.number(params, pp, "c0", 1.0)}};
    } else if (kind == "limited_angle") {
        if (!r.object(params, pp, {"center", "half_width", "taper"})) return json();
        out["params"] = {
            {"center", r.number(params, pp, "center", std::numbers::pi / 2)},
            {"half_width", r.number(params, pp, "half_width", std::numbers::pi / 6,
                                    [](double x) { return x >= 0.0; }, "nonnegative")},
            {"taper", r.number(params, pp, "taper", 0.1, positive, "positive")}};
    } else if (kind == "bump") {
        if (!r.object(params, pp, {"center", "width", "amplitude", "anisotropy", "direction"}))
            return json();
        out["params"] = {
            {"center", vec_json(r.point(params, pp, "center", Vec2{}))},
            {"width", r.number(params, pp, "width", 0.3, positive, "positive")},
            {"amplitude", r.number(params, pp, "amplitude", 1.0)},
            {"anisotropy", r.number(params, pp, "anisotropy", 0.0)},
            {"direction", r.number(params, pp, "direction", 0.0)}};
    } else {
        if (!r.object(params, pp, {"n_angles", "values", "source"})) return json();
        const int na = r.integer(params, pp, "n_angles", 64, [](long long x) { return x >= 1; },
                                 ">= 1");
        json p{{"n_angles", na}};
        if (params.contains("values") == params.contains("source")) {
            r.fail(pp, "tabulated weight needs exactly one of values or source");
            return json();
        }
        if (params.contains("source")) {
            json src = read_weight(r, params.at("source"), Reader::join(pp, "source"), grid);
            if (src.is_object() && src.value("kind", "") == "tabulated") {
                r.fail(Reader::join(pp, "source"), "source must not itself be tabulated");
            }
            p["source"] = src;
        } else {
            p["values"] = json::array();
            const auto vals = r.numbers(params, pp, "values", {});
            for (double v : vals) p["values"].push_back(v);
            if (grid && vals.size() != grid->size() * static_cast<std::size_t>(na)) {
                r.fail(Reader::join(pp, "values"),
                       "must hold N*N*n_angles = " +
                           std::to_string(grid->size() * static_cast<std::size_t>(na)) + " numbers");
            }
        }
        out["params"] = p;
    }
    // Surface factory-level rejections (e.g. a cone that hides every direction).
    if (grid && r.errors.size() == before) {
        try {
            (void)make_weight(out, *grid);
        } catch (const linstab::Error& e) {
            r.fail(path, e.what());
        }
    }
    return out;
}

}  // namespace detail

inline WeightSpec make_weight(const json& spec, const Grid& grid) {
    const std::string kind = spec.at("kind").get<std::string>();
    const json& p = spec.at("params");
    if (kind == "constant") return WeightSpec::constant(p.at("c0").get<double>());
    if (kind == "limited_angle") {
        return WeightSpec::limited_angle(p.at("center").get<double>(),
                                         p.at("half_width").get<double>(),
                                         p.at("taper").get<double>());
    }
    if (kind == "bump") {
        const auto& c = p.at("center");
        return WeightSpec::bump({c[0].get<double>(), c[1].get<double>()},
                                p.at("width").get<double>(), p.at("amplitude").get<double>(),
                                p.at("anisotropy").get<double>(), p.at("direction").get<double>());
    }
    if (kind == "tabulated") {
        const int na = p.at("n_angles").get<int>();
        if (p.contains("source")) {
            const WeightSpec src = make_weight(p.at("source"), grid);
            return WeightSpec::tabulate(grid, na, [&](Vec2 x, Vec2 t) { return src(x, t); });
        }
        return WeightSpec::tabulated(grid, na, p.at("values").get<std::vector<double>>());
    }
    throw InvalidParameter("unknown weight kind \"" + kind + "\"");
}

struct Validation {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;
    bool ok() const { return config.has_value(); }
};

/// Validates a whole document, collecting every violation.
inline Validation validate(std::string_view text) {
    Validation out;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        out.errors.push_back(std::string("config is not valid JSON: ") + e.what());
        return out;
    }
    detail::Reader r;
    if (!r.object(doc, "", {"experiment", "grid", "weight", "rays", "sobolev_orders", "lambdas",
                            "holder", "seed", "output_dir", "seq", "trials", "stability",
                            "perturbation", "probe", "ellipticity", "findim"})) {
        out.errors = r.errors;
        return out;
    }
    ExperimentConfig c;
    auto positive = [](double x) { return x > 0.0; };
    auto positive_int = [](long long x) { return x >= 1; };

    if (!doc.contains("experiment")) {
        r.fail("experiment", "required");
    } else {
        c.experiment = r.string(doc, "", "experiment", "", experiment_names());
    }

    if (!doc.contains("seed")) {
        r.fail("", "seed required for reproducibility");
    } else if (!doc.at("seed").is_number_integer() ||
               (doc.at("seed").is_number_integer() && !doc.at("seed").is_number_unsigned() &&
                doc.at("seed").get<long long>() < 0)) {
        r.fail("seed", "must be an unsigned 64-bit integer");
    } else {
        c.seed = doc.at("seed").get<std::uint64_t>();
    }

    if (doc.contains("output_dir")) {
        c.output_dir = r.string(doc, "", "output_dir", c.output_dir);
        if (c.output_dir.empty()) r.fail("output_dir", "must not be empty");
    }

    std::optional<Grid> grid;
    {
        const json g = doc.value("grid", json::object());
        if (r.object(g, "grid", {"L", "N"})) {
            c.L = r.number(g, "grid", "L", c.L, positive, "positive");
            if (g.contains("N")) {
                const auto& v = g.at("N");
                if (!v.is_number_integer() || v.get<long long>() < 8 || v.get<long long>() % 2 != 0 ||
                    v.get<long long>() > 4096) {
                    r.fail("", "grid.N must be even ≥ 8");
                } else {
                    c.N = v.get<int>();
                }
            }
        }
        try {
            grid.emplace(c.L, c.N);
        } catch (const linstab::Error&) {
        }
    }

    c.weight = detail::read_weight(r, doc.value("weight", json{{"kind", "constant"}}), "weight",
                                   grid ? &*grid : nullptr);

    {
        const json j = doc.value("rays", json::object());
        if (r.object(j, "rays", {"mode", "n_angles", "n_offsets", "t_step", "oversampling"})) {
            c.rays.mode = r.string(j, "rays", "mode", c.rays.mode, {"fixed", "scaled"});
            c.rays.n_angles = r.integer(j, "rays", "n_angles", c.rays.n_angles, positive_int, ">= 1");
            c.rays.n_offsets = r.integer(j, "rays", "n_offsets", c.rays.n_offsets, positive_int, ">= 1");
            if (j.contains("t_step")) c.rays.t_step = r.number(j, "rays", "t_step", 0.0, positive, "positive");
            c.rays.oversampling = r.number(j, "rays", "oversampling", c.rays.oversampling, positive, "positive");
        }
    }

    c.sobolev_orders = r.numbers(doc, "", "sobolev_orders", c.sobolev_orders);
    c.lambdas = r.numbers(doc, "", "lambdas", c.lambdas, positive, "positive");
    if (!detail::increasing(c.lambdas)) r.fail("lambdas", "must be strictly increasing");

    {
        const json j = doc.value("holder", json::object());
        if (r.object(j, "holder", {"K", "scales", "samples", "mu1", "mu2", "f1_amplitude",
                                   "weakest_direction", "resolutions", "expect"})) {
            auto& h = c.holder;
            h.K = r.number(j, "holder", "K", h.K, positive, "positive");
            h.scales = r.numbers(j, "holder", "scales", h.scales, positive, "positive");
            if (!detail::decreasing(h.scales)) r.fail("holder.scales", "must be strictly decreasing");
            h.samples = r.integer(j, "holder", "samples", h.samples, positive_int, ">= 1");
            auto unit = [](double x) { return x > 0.0 && x <= 1.0; };
            h.mu1 = r.number(j, "holder", "mu1", h.mu1, unit, "in (0, 1]");
            h.mu2 = r.number(j, "holder", "mu2", h.mu2, unit, "in (0, 1]");
            if (!(h.mu1 * h.mu2 > 0.5)) r.fail("holder", "mu1 * mu2 must exceed 1/2");
            h.f1_amplitude = r.number(j, "holder", "f1_amplitude", h.f1_amplitude,
                                      [](double x) { return x >= 0.0; }, "nonnegative");
            h.weakest_direction = r.boolean(j, "holder", "weakest_direction", h.weakest_direction);
            h.resolutions = r.integers(j, "holder", "resolutions", {});
            h.expect = r.string(j, "holder", "expect", h.expect, {"holds", "degenerates"});
            if (h.expect == "degenerates" && h.resolutions.size() < 2) {
                r.fail("holder.resolutions", "needs at least two entries when expect is degenerates");
            }
        }
    }

    {
        const json j = doc.value("seq", json::object());
        if (r.object(j, "seq", {"M"})) {
            c.seq_M = r.integer(j, "seq", "M", c.seq_M,
                                [](long long x) { return x >= 1 && x <= 100000; }, "in [1, 100000]");
        }
    }

    c.trials = r.integer(doc, "", "trials", c.experiment == "interp-check" ? 1000 : 100,
                         [](long long x) { return x >= 1 && x <= 1000000; }, "in [1, 1000000]");

    {
        const json j = doc.value("stability", json::object());
        if (r.object(j, "stability", {"resolutions", "expect"})) {
            c.resolutions = r.integers(j, "stability", "resolutions", c.resolutions);
            c.stability_expect = r.string(j, "stability", "expect", c.stability_expect,
                                          {"stable", "unstable", "none"});
        }
    }

    {
        const json j = doc.value("perturbation", json::object());
        if (r.object(j, "perturbation", {"delta", "eps"})) {
            c.perturbation_delta = detail::read_weight(
                r,
                j.value("delta", json{{"kind", "bump"},
                                      {"params", {{"center", {0.3, 0.1}}, {"width", 0.3},
                                                  {"anisotropy", 0.5}, {"direction", 0.7}}}}),
                "perturbation.delta", grid ? &*grid : nullptr);
            c.eps = r.numbers(j, "perturbation", "eps", c.eps, positive, "positive");
            if (!detail::increasing(c.eps)) r.fail("perturbation.eps", "must be strictly increasing");
        }
    }

    {
        const json j = doc.value("probe", json::object());
        if (r.object(j, "probe", {"x0", "xi0", "mode", "lambda3_h2", "oversampling", "rotate",
                                  "tolerance", "isotropy"})) {
            auto& p = c.probe;
            p.x0 = r.point(j, "probe", "x0", p.x0);
            p.xi0 = r.point(j, "probe", "xi0", p.xi0);
            if (std::abs(norm(p.xi0) - 1.0) > 1e-12) r.fail("probe.xi0", "must be a unit vector");
            p.mode = r.string(j, "probe", "mode", p.mode, {"refined", "matrix"});
            p.lambda3_h2 = r.number(j, "probe", "lambda3_h2", p.lambda3_h2, positive, "positive");
            p.oversampling = r.number(j, "probe", "oversampling", p.oversampling, positive, "positive");
            p.rotate = r.boolean(j, "probe", "rotate", p.rotate);
            p.tolerance = r.number(j, "probe", "tolerance", p.tolerance, positive, "positive");
            p.isotropy = r.number(j, "probe", "isotropy", p.isotropy, positive, "positive");
            const double lam0 = c.lambdas.front();
            if (norm(p.x0) > kSupportRadius - 3.0 / std::sqrt(lam0)) {
                r.fail("probe.x0", "must stay 3/sqrt(lambda) inside the unit disk for every lambda");
            }
        }
    }

    {
        const json j = doc.value("ellipticity", json::object());
        if (r.object(j, "ellipticity", {"density"})) {
            c.ellipticity_density = r.integer(j, "ellipticity", "density", c.ellipticity_density,
                                              [](long long x) { return x >= 8 && x <= 2048; },
                                              "in [8, 2048]");
        }
    }

    {
        const json j = doc.value("findim", json::object());
        if (r.object(j, "findim", {"maps", "n", "m", "samples", "sigma_lo"})) {
            auto& f = c.findim;
            f.maps = r.integer(j, "findim", "maps", f.maps, positive_int, ">= 1");
            f.n = r.integer(j, "findim", "n", f.n, [](long long x) { return x >= 1 && x <= 32; }, "in [1, 32]");
            f.m = r.integer(j, "findim", "m", f.m, [](long long x) { return x >= 1 && x <= 32; }, "in [1, 32]");
            if (f.m < f.n) r.fail("findim.m", "must be >= findim.n");
            f.samples = r.integer(j, "findim", "samples", f.samples, positive_int, ">= 1");
            f.sigma_lo = r.number(j, "findim", "sigma_lo", f.sigma_lo, positive, "positive");
        }
    }

    if (!r.errors.empty()) {
        out.errors = std::move(r.errors);
        return out;
    }

    json rays{{"mode", c.rays.mode},
              {"n_angles", c.rays.n_angles},
              {"n_offsets", c.rays.n_offsets},
              {"oversampling", c.rays.oversampling}};
    rays["t_step"] = c.rays.t_step ? json(*c.rays.t_step) : json("auto");
    json holder_res = json::array();
    for (int n : c.holder.resolutions) holder_res.push_back(n);
    c.echo = {
        {"experiment", c.experiment},
        {"grid", {{"L", c.L}, {"N", c.N}}},
        {"weight", c.weight},
        {"rays", rays},
        {"sobolev_orders", c.sobolev_orders},
        {"lambdas", c.lambdas},
        {"holder",
         {{"K", c.holder.K},
          {"scales", c.holder.scales},
          {"samples", c.holder.samples},
          {"mu1", c.holder.mu1},
          {"mu2", c.holder.mu2},
          {"f1_amplitude", c.holder.f1_amplitude},
          {"weakest_direction", c.holder.weakest_direction},
          {"resolutions", holder_res},
          {"expect", c.holder.expect}}},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"seq", {{"M", c.seq_M}}},
        {"trials", c.trials},
        {"stability", {{"resolutions", c.resolutions}, {"expect", c.stability_expect}}},
        {"perturbation", {{"delta", c.perturbation_delta}, {"eps", c.eps}}},
        {"probe",
         {{"x0", detail::vec_json(c.probe.x0)},
          {"xi0", detail::vec_json(c.probe.xi0)},
          {"mode", c.probe.mode},
          {"lambda3_h2", c.probe.lambda3_h2},
          {"oversampling", c.probe.oversampling},
          {"rotate", c.probe.rotate},
          {"tolerance", c.probe.tolerance},
          {"isotropy", c.probe.isotropy}}},
        {"ellipticity", {{"density", c.ellipticity_density}}},
        {"findim",
         {{"maps", c.findim.maps},
          {"n", c.findim.n},
          {"m", c.findim.m},
          {"samples", c.findim.samples},
          {"sigma_lo", c.findim.sigma_lo}}}};
    out.config = std::move(c);
    return out;
}

}  // namespace linstab::cli
