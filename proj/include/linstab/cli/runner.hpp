#pragma once

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "linstab/cli/config.hpp"
#include "linstab/errors.hpp"
#include "linstab/grid.hpp"
#include "linstab/holder.hpp"
#include "linstab/seqlab.hpp"
#include "linstab/spectral.hpp"
#include "linstab/stability.hpp"
#include "linstab/weight.hpp"
#include "linstab/xray.hpp"

namespace linstab::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";

/// Shortest round-trip decimal text.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) {
        for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
        text_ += '\n';
    }

    template <typename... Ts>
    void row(const Ts&... values) {
        bool first = true;
        ((text_ += (first ? "" : ","), text_ += cell(values), first = false), ...);
        text_ += '\n';
    }

    const std::string& text() const noexcept { return text_; }

private:
    static std::string cell(double v) { return format_number(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& v) { return v; }

    std::string text_;
};

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

struct Contract {
    std::string name;
    bool passed;
    std::string detail;
};

/// Collects outputs, stage timings, results and contract outcomes of one run.
class RunContext {
public:
    explicit RunContext(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& text) {
        std::ofstream os(dir_ / name, std::ios::binary);
        os << text;
        if (!os) throw Error("cannot write " + (dir_ / name).string());
        outputs_.push_back({{"file", name}, {"bytes", text.size()}, {"sha256", sha256_hex(text)}});
    }

    template <typename Fn>
    auto stage(const std::string& name, Fn&& fn) {
        current_ = name;
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(name, t0);
        } else {
            auto out = fn();
            record(name, t0);
            return out;
        }
    }

    void check(const std::string& name, bool ok, const std::string& detail = "") {
        contracts_.push_back({name, ok, detail});
    }

    json results = json::object();

    const std::string& current_stage() const noexcept { return current_; }
    const json& outputs() const noexcept { return outputs_; }
    const json& stages() const noexcept { return stages_; }
    const std::vector<Contract>& contracts() const noexcept { return contracts_; }
    bool passed() const {
        return std::all_of(contracts_.begin(), contracts_.end(),
                           [](const Contract& c) { return c.passed; });
    }

private:
    void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        stages_.push_back({{"name", name}, {"seconds", s}});
    }

    std::filesystem::path dir_;
    json outputs_ = json::array();
    json stages_ = json::array();
    std::vector<Contract> contracts_;
    std::string current_;
};

namespace detail {

inline RaySet make_rays(const ExperimentConfig& c, const Grid& grid) {
    if (c.rays.mode == "scaled") return RaySet::for_grid(grid, c.rays.oversampling);
    return RaySet(c.rays.n_angles, c.rays.n_offsets,
                  c.rays.t_step ? *c.rays.t_step : 0.5 * grid.spacing());
}

inline std::string order_label(double s) { return "hs_norm_s" + format_number(s); }

inline void run_interp(const ExperimentConfig& c, RunContext& ctx) {
    const Grid grid(c.L, c.N);
    double lo = *std::min_element(c.sobolev_orders.begin(), c.sobolev_orders.end());
    double hi = *std::max_element(c.sobolev_orders.begin(), c.sobolev_orders.end());
    if (hi - lo < 1e-9) {
        lo = 0.0;
        hi = 4.0;
    }
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> order(lo, hi);
    std::uniform_real_distribution<double> alpha(0.0, 1.0);
    std::uniform_real_distribution<double> decay(0.0, 3.0);
    const auto freq = frequency_norms_squared(grid);
    Csv csv({"trial", "s1", "s2", "alpha1", "ratio"});
    double worst = 0.0;
    ctx.stage("interpolation", [&] {
        for (int t = 0; t < c.trials; ++t) {
            ComplexGridFunction f(grid);
            for (std::size_t k = 0; k < grid.size(); ++k) f[k] = {unif(rng), unif(rng)};
            // Random spectral decay so the trials span rough and smooth fields.
            auto spec = to_spectral(f);
            const double p = decay(rng);
            for (std::size_t k = 0; k < grid.size(); ++k) {
                spec.coefficients[k] *= std::pow(1.0 + freq[k], -0.5 * p);
            }
            f = from_spectral(spec);
            double s1 = order(rng), s2 = order(rng);
            const double a1 = alpha(rng);
            if (s1 == s2) s2 = s1 + 1.0;
            const double ratio = interpolation_check(f, s1, s2, a1);
            worst = std::max(worst, ratio);
            csv.row(t, s1, s2, a1, ratio);
        }
    });
    ctx.write("interp.csv", csv.text());
    ctx.results["max_ratio"] = worst;
    ctx.results["trials"] = c.trials;
    ctx.check("max_ratio <= 1 + 1e-12", worst <= 1.0 + 1e-12, format_number(worst));
}

inline void run_seq(const ExperimentConfig& c, RunContext& ctx) {
    const std::size_t M = static_cast<std::size_t>(c.seq_M);
    std::vector<std::string> header{"k"};
    for (double s : c.sobolev_orders) header.push_back(order_label(s));
    header.push_back("map_residual");
    Csv csv(header);
    double worst_residual = 0.0, worst_norm = 0.0;
    ctx.stage("counterexample", [&] {
        for (std::size_t k = 1; k <= M; ++k) {
            const auto x = seq::counterexample(k, M);
            std::string line = std::to_string(k);
            for (double s : c.sobolev_orders) {
                const double v = seq::hs_norm(x, s);
                const double kk = static_cast<double>(k);
                const double expect = std::exp((s + 1.0) * std::log(kk) - kk);
                worst_norm = std::max(worst_norm, std::abs(v - expect) / expect);
                line += "," + format_number(v);
            }
            const double residual = seq::l2_norm(seq::seq_map(x)) / seq::l2_norm(x);
            worst_residual = std::max(worst_residual, residual);
            line += "," + format_number(residual);
            csv.row(line);
        }
    });
    ctx.write("seq.csv", csv.text());
    ctx.results["max_map_residual"] = worst_residual;
    ctx.results["max_norm_error"] = worst_norm;
    ctx.check("map residual <= 1e-15", worst_residual <= 1e-15, format_number(worst_residual));
    ctx.check("h^s norms match k^(s+1) e^-k to 1e-12", worst_norm <= 1e-12, format_number(worst_norm));

    Csv ratios({"k", "s1", "s2", "log10_ratio"});
    json growth = json::array();
    for (double s1 : c.sobolev_orders) {
        for (double s2 : c.sobolev_orders) {
            if (!(s1 < s2)) continue;
            for (std::size_t k = 1; k <= M; ++k) {
                ratios.row(k, s1, s2, seq::instability_ratio(k, s1, s2).log10_value);
            }
            if (M >= 30) {
                const double g = seq::instability_ratio(30, s1, s2).log10_value -
                                 seq::instability_ratio(10, s1, s2).log10_value;
                growth.push_back({{"s1", s1}, {"s2", s2}, {"log10_growth_10_to_30", g}});
                ctx.check("instability ratio grows > 1e3 from k=10 to 30 (s1=" + format_number(s1) +
                              ", s2=" + format_number(s2) + ")",
                          g > 3.0, format_number(g));
            }
        }
    }
    ctx.write("seq_ratio.csv", ratios.text());
    ctx.results["ratio_growth"] = growth;
}

inline void run_xray(const ExperimentConfig& c, RunContext& ctx) {
    const Grid grid(c.L, c.N);
    const WeightSpec w = make_weight(c.weight, grid);
    const RaySet rays = make_rays(c, grid);
    const auto nodes = disk_nodes(grid, kSupportRadius);
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Csv csv({"trial", "pairing_dev", "identity_dev", "linearity_dev"});
    double worst_pair = 0.0, worst_id = 0.0, worst_lin = 0.0;
    ctx.stage("identities", [&] {
        for (int t = 0; t < c.trials; ++t) {
            GridFunction f(grid), f2(grid);
            for (auto k : nodes) f[k] = unif(rng);
            for (auto k : nodes) f2[k] = unif(rng);
            Sinogram g{rays, std::vector<double>(rays.size())};
            for (auto& v : g.values) v = unif(rng);
            const auto If = forward(w, f, rays);
            const auto adj = adjoint(w, g, grid);
            const double lhs = dsigma_inner(If, g);
            const double rhs = inner(f, adj);
            const double pscale = std::max(dsigma_norm(If) * dsigma_norm(g) + l2_norm(f) * l2_norm(adj), 1e-300);
            const double pd = std::abs(lhs - rhs) / pscale;
            const double nn = inner(normal_compose(w, f, rays), f);
            const double ii = std::pow(dsigma_norm(If), 2);
            const double id = std::abs(nn - ii) / std::max({ii, std::pow(l2_norm(f), 2), 1e-300});
            const double a = unif(rng), b = unif(rng);
            const auto combo = forward(w, a * f + b * f2, rays);
            const auto If2 = forward(w, f2, rays);
            double ld = 0.0, lscale = 1e-300;
            for (std::size_t r = 0; r < rays.size(); ++r) {
                ld = std::max(ld, std::abs(combo.values[r] - a * If.values[r] - b * If2.values[r]));
                lscale = std::max(lscale, std::abs(a * If.values[r]) + std::abs(b * If2.values[r]));
            }
            ld /= lscale;
            worst_pair = std::max(worst_pair, pd);
            worst_id = std::max(worst_id, id);
            worst_lin = std::max(worst_lin, ld);
            csv.row(t, pd, id, ld);
        }
    });
    ctx.write("xray.csv", csv.text());
    ctx.results["max_pairing_dev"] = worst_pair;
    ctx.results["max_identity_dev"] = worst_id;
    ctx.results["max_linearity_dev"] = worst_lin;
    ctx.results["weight"] = w.fingerprint();
    ctx.check("adjoint pairing <= 1e-12", worst_pair <= 1e-12, format_number(worst_pair));
    ctx.check("normal identity <= 1e-12", worst_id <= 1e-12, format_number(worst_id));
    ctx.check("forward linearity <= 1e-12", worst_lin <= 1e-12, format_number(worst_lin));
}

inline void run_ellipticity(const ExperimentConfig& c, RunContext& ctx) {
    const Grid grid(c.L, c.N);
    const WeightSpec w = make_weight(c.weight, grid);
    const int d = c.ellipticity_density;
    const auto res = ctx.stage("margin", [&] { return ellipticity_margin(w, d); });
    Csv csv({"direction", "zeta1", "zeta2", "min_value"});
    ctx.stage("profile", [&] {
        const int n_dirs = 4 * d;
        const double step = 2.0 * kOuterRadius / (d - 1);
        for (int k = 0; k < n_dirs; ++k) {
            const Vec2 zeta = unit_from_angle(2.0 * std::numbers::pi * k / n_dirs);
            const Vec2 tp = perp(zeta);
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const Vec2 x{-kOuterRadius + i * step, -kOuterRadius + j * step};
                    if (norm(x) > kOuterRadius) continue;
                    const double a = w(x, tp), b = w(x, -tp);
                    best = std::min(best, a * a + b * b);
                }
            csv.row(k, zeta.x1, zeta.x2, best);
        }
    });
    ctx.write("ellipticity.csv", csv.text());
    ctx.results["margin"] = res.margin;
    ctx.results["elliptic"] = res.margin > 0.0;
    ctx.results["witness_point"] = vec_json(res.witness_point);
    ctx.results["witness_covector"] = vec_json(res.witness_covector);
    ctx.results["weight"] = w.fingerprint();
    ctx.check("margin finite and nonnegative", std::isfinite(res.margin) && res.margin >= 0.0,
              format_number(res.margin));
}

inline void run_stability(const ExperimentConfig& c, RunContext& ctx) {
    Csv csv({"resolution", "sigma_min", "C_estimate"});
    std::vector<double> sigmas;
    json entries = json::array();
    std::string fingerprint;
    for (std::size_t idx = 0; idx < c.resolutions.size(); ++idx) {
        const int n = c.resolutions[idx];
        const Grid grid(c.L, n);
        const WeightSpec w = make_weight(c.weight, grid);
        fingerprint = w.fingerprint();
        const RaySet rays = make_rays(c, grid);
        const auto m = ctx.stage("assemble N=" + std::to_string(n),
                                 [&] { return assemble_normal_matrix(w, grid, rays); });
        const double spot = spot_check_columns(m, 5, c.seed + idx);
        ctx.check("column spot check N=" + std::to_string(n) + " <= 1e-12", spot <= 1e-12,
                  format_number(spot));
        const auto e = ctx.stage("eigensolve N=" + std::to_string(n), [&] { return stability_constant(m); });
        sigmas.push_back(e.sigma_min);
        csv.row(n, e.sigma_min, e.C_estimate);
        json entry{{"resolution", n}, {"sigma_min", e.sigma_min}, {"C_estimate", e.C_estimate},
                   {"residual", e.residual}, {"rows", m.row_nodes.size()}, {"cols", m.col_nodes.size()},
                   {"rays", {{"n_angles", rays.n_angles()}, {"n_offsets", rays.n_offsets()}, {"t_step", rays.t_step()}}}};
        if (e.sigma_min > 0.0) {
            const double prod = e.C_estimate * e.sigma_min;
            ctx.check("C_estimate * sigma_min = 1 at N=" + std::to_string(n),
                      std::abs(prod - 1.0) <= 1e-12, format_number(prod));
        }
        if (idx == 0) {
            const double svd = ctx.stage("dense svd N=" + std::to_string(n),
                                         [&] { return stability_constant_svd(m); });
            const double rel = std::abs(svd - e.sigma_min) / std::max(e.sigma_min, 1e-300);
            entry["dense_svd_sigma_min"] = svd;
            ctx.check("dense SVD reproduces sigma_min at N=" + std::to_string(n) + " to 1e-8",
                      e.sigma_min == 0.0 ? svd <= 1e-8 : rel <= 1e-8, format_number(rel));
        }
        entries.push_back(entry);
    }
    ctx.write("stability.csv", csv.text());
    const double lo = *std::min_element(sigmas.begin(), sigmas.end());
    const double hi = *std::max_element(sigmas.begin(), sigmas.end());
    const double spread = hi > 0.0 ? lo / hi : 0.0;
    const double drop = sigmas.back() > 0.0 ? sigmas.front() / sigmas.back()
                                            : std::numeric_limits<double>::infinity();
    ctx.results["entries"] = entries;
    ctx.results["min_over_max"] = spread;
    ctx.results["first_over_last"] = drop;
    ctx.results["weight"] = fingerprint;
    if (c.stability_expect == "stable") {
        ctx.check("sigma_min min/max >= 0.5 across resolutions", spread >= 0.5, format_number(spread));
    } else if (c.stability_expect == "unstable") {
        ctx.check("sigma_min drops by >= 10 from first to last resolution", drop >= 10.0,
                  format_number(drop));
    }
}

inline void run_perturbation(const ExperimentConfig& c, RunContext& ctx) {
    const Grid grid(c.L, c.N);
    const WeightSpec w0 = make_weight(c.weight, grid);
    const WeightSpec delta = make_weight(c.perturbation_delta, grid);
    const RaySet rays = make_rays(c, grid);
    std::vector<double> eps{0.0};
    eps.insert(eps.end(), c.eps.begin(), c.eps.end());
    const auto rep = ctx.stage("scan", [&] { return perturbation_scan(w0, delta, eps, grid, rays); });
    Csv csv({"eps", "sigma_min", "deviation"});
    bool bounded = true;
    for (const auto& p : rep.points) {
        csv.row(p.eps, p.sigma_min, p.deviation);
        bounded = bounded && p.deviation <= rep.lipschitz * p.eps * (1.0 + 1e-12);
    }
    ctx.write("perturbation.csv", csv.text());
    ctx.results["sigma_base"] = rep.sigma_base;
    ctx.results["lipschitz"] = rep.lipschitz;
    ctx.results["fitted_slope"] = rep.fitted_slope;
    ctx.results["weight"] = w0.fingerprint();
    ctx.results["delta"] = delta.fingerprint();
    const double first = rep.points[1].deviation, last = rep.points.back().deviation;
    ctx.check("eps = 0 reproduces sigma_min(w0)", rep.points[0].sigma_min == rep.sigma_base);
    ctx.check("deviation <= L eps at every eps", bounded && std::isfinite(rep.lipschitz),
              "L=" + format_number(rep.lipschitz));
    ctx.check("deviation at smallest eps < deviation at largest eps", first < last,
              format_number(first) + " < " + format_number(last));
}

inline void write_probe(RunContext& ctx, const std::string& name, const ProbeReport& rep) {
    Csv csv({"lambda", "measured", "analytic", "rel_err"});
    for (std::size_t k = 0; k < rep.lambdas.size(); ++k) {
        csv.row(rep.lambdas[k], rep.measured[k], rep.analytic, rep.rel_err[k]);
    }
    ctx.write(name, csv.text());
}

inline json probe_json(const ProbeReport& rep) {
    return {{"x0", vec_json(rep.x0)},       {"xi0", vec_json(rep.xi0)},
            {"lambdas", rep.lambdas},        {"resolutions", rep.resolutions},
            {"measured", rep.measured},      {"analytic", rep.analytic},
            {"rel_err", rep.rel_err},        {"converging", rep.converging()}};
}

inline void run_probe(const ExperimentConfig& c, RunContext& ctx) {
    const Grid grid(c.L, c.N);
    const WeightSpec w = make_weight(c.weight, grid);
    ProbeRefinement refine;
    refine.side = c.L;
    refine.lambda3_h2 = c.probe.lambda3_h2;
    refine.ray_oversampling = c.probe.oversampling;
    std::optional<OperatorMatrix> m;
    if (c.probe.mode == "matrix") {
        m = ctx.stage("assemble", [&] { return assemble_normal_matrix(w, grid, make_rays(c, grid)); });
    }
    auto probe = [&](Vec2 xi) {
        return m ? symbol_probe(*m, c.probe.x0, xi, c.lambdas)
                 : symbol_probe(w, c.probe.x0, xi, c.lambdas, refine);
    };
    const auto rep = ctx.stage("probe", [&] { return probe(c.probe.xi0); });
    write_probe(ctx, "probe.csv", rep);
    ctx.results["probe"] = probe_json(rep);
    ctx.results["weight"] = w.fingerprint();
    const double last = std::abs(rep.rel_err.back());
    ctx.check("relative error nonincreasing over the upper half of the lambda list", rep.converging());
    ctx.check("relative error at largest lambda < at smallest", last < std::abs(rep.rel_err.front()),
              format_number(last) + " vs " + format_number(std::abs(rep.rel_err.front())));
    ctx.check("relative error at largest lambda <= " + format_number(c.probe.tolerance),
              last <= c.probe.tolerance, format_number(last));
    if (c.probe.rotate) {
        const Vec2 xr = perp(c.probe.xi0);
        const auto rot = ctx.stage("probe rotated", [&] { return probe(xr); });
        write_probe(ctx, "probe_rotated.csv", rot);
        const double iso = std::abs(rot.measured.back() / rep.measured.back() - 1.0);
        ctx.results["probe_rotated"] = probe_json(rot);
        ctx.results["isotropy"] = iso;
        ctx.check("90 degree rotation changes the limit by <= " + format_number(c.probe.isotropy),
                  iso <= c.probe.isotropy, format_number(iso));
    }
}

inline void run_holder(const ExperimentConfig& c, RunContext& ctx) {
    const auto& h = c.holder;
    std::vector<int> resolutions = h.resolutions.empty() ? std::vector<int>{c.N} : h.resolutions;
    const bool multi = !h.resolutions.empty();
    json fits = json::array();
    std::vector<double> chats;
    for (int n : resolutions) {
        const Grid grid(c.L, n);
        const WeightSpec w = make_weight(c.weight, grid);
        const RaySet rays = make_rays(c, grid);
        const std::string tag = multi ? "_N" + std::to_string(n) : "";
        const auto m = ctx.stage("assemble N=" + std::to_string(n),
                                 [&] { return assemble_normal_matrix(w, grid, rays); });
        const TestMap map(m, unit_l2(smooth_bump(grid, {0.1, -0.1}, 0.6)));
        GridFunction f0(grid);
        if (h.f1_amplitude > 0.0) {
            f0 = linstab::detail::bump_directions(grid, 1, c.seed ^ 0x9e3779b97f4a7c15ULL)[0];
            f0 *= h.f1_amplitude;
        }
        HolderOptions opt;
        opt.samples = h.samples;
        opt.seed = c.seed;
        opt.weakest_direction = h.weakest_direction;
        opt.mu1 = h.mu1;
        opt.mu2 = h.mu2;
        const auto rep = ctx.stage("holder N=" + std::to_string(n), [&] { return holder_fit(map, f0, h.K, h.scales, opt); });
        const auto rem = ctx.stage("remainder N=" + std::to_string(n), [&] {
            return remainder_bound_estimate(map, f0, h.scales, h.samples, c.seed);
        });
        Csv csv({"sample_id", "scale", "lhs_norm", "rhs_norm", "ratio"});
        for (const auto& s : rep.samples) csv.row(s.sample_id, s.scale, s.lhs_norm, s.rhs_norm, s.ratio);
        ctx.write("holder" + tag + ".csv", csv.text());
        Csv rcsv({"scale", "C_hat"});
        for (std::size_t k = 0; k < rem.scales.size(); ++k) rcsv.row(rem.scales[k], rem.C_hat_per_scale[k]);
        ctx.write("remainder" + tag + ".csv", rcsv.text());
        chats.push_back(rep.C_hat);
        fits.push_back({{"resolution", n},
                        {"spaces", rep.spaces},
                        {"mu1", rep.mu1},
                        {"mu2", rep.mu2},
                        {"K", rep.K},
                        {"C_hat", rep.C_hat},
                        {"slope", rep.slope},
                        {"samples", rep.samples.size()},
                        {"skipped", rep.skipped},
                        {"sigma_min_linearization", rep.sigma_min_linearization},
                        {"hypothesis_ok", rep.hypothesis_ok},
                        {"message", rep.message},
                        {"remainder_C_hat", rem.C_hat},
                        {"remainder_stabilization", rem.stabilization()},
                        {"f0_l2_norm", l2_norm(f0)},
                        {"seed", rep.seed}});
        const std::string at = " (N=" + std::to_string(n) + ")";
        ctx.check("linearization stable" + at, rep.hypothesis_ok,
                  format_number(rep.sigma_min_linearization));
        ctx.check("remainder constant stable within 20% over the two smallest scales" + at,
                  rem.stabilization() < 0.2, format_number(rem.stabilization()));
        if (h.expect == "holds") {
            ctx.check("single finite C_hat" + at, std::isfinite(rep.C_hat) && !rep.samples.empty(),
                      format_number(rep.C_hat));
            ctx.check("log-log slope >= mu1 mu2 - 0.05" + at, rep.slope_ok(), format_number(rep.slope));
            ctx.check("intermediate chain holds" + at, rep.chain_ok());
        }
    }
    ctx.results["fits"] = fits;
    if (h.expect == "degenerates") {
        const double growth = chats.front() > 0.0 ? chats.back() / chats.front()
                                                  : std::numeric_limits<double>::infinity();
        ctx.results["C_hat_growth"] = growth;
        ctx.check("C_hat grows by >= 5 across resolutions", growth >= 5.0, format_number(growth));
    }
}

inline void run_findim(const ExperimentConfig& c, RunContext& ctx) {
    const auto& f = c.findim;
    Csv csv({"map_id", "sigma_min", "C0", "C_x0", "radius", "max_ratio", "bound", "passed"});
    int passed = 0;
    ctx.stage("lipschitz", [&] {
        for (int i = 0; i < f.maps; ++i) {
            const auto map = random_cubic_map(f.n, f.m, c.seed + static_cast<std::uint64_t>(i), f.sigma_lo);
            const double sigma =
                Eigen::JacobiSVD<Eigen::MatrixXd>(map.jacobian(map.x0())).singularValues().minCoeff();
            const double radius = admissible_radius(map, 1.0 / sigma);
            const auto rep = findim_lipschitz_check(map, radius, f.samples, c.seed + static_cast<std::uint64_t>(i));
            passed += rep.passed ? 1 : 0;
            csv.row(i, rep.sigma_min, rep.C0, rep.C_x0, rep.radius, rep.max_ratio, rep.bound, rep.passed);
        }
    });
    ctx.write("findim.csv", csv.text());
    ctx.results["maps"] = f.maps;
    ctx.results["passed_maps"] = passed;
    ctx.check("every sample satisfies |x - x0| <= 2 C0 |A(x) - A(x0)|", passed == f.maps,
              std::to_string(passed) + "/" + std::to_string(f.maps));
}

}  // namespace detail

struct RunOutcome {
    json report;
    int exit_code;  // 0 all contracts passed, 1 a contract failed, 2 a stage failed
};

/// Runs the experiment, writes CSVs and report.json into `dir`.
inline RunOutcome run(const ExperimentConfig& c, const std::filesystem::path& dir,
                      const json& dir_info = json::object()) {
    std::filesystem::create_directories(dir);
    RunContext ctx(dir);
    json report{{"artifact", "linstab"},
                {"version", kArtifactVersion},
                {"experiment", c.experiment},
                {"seed", c.seed},
                {"config", c.echo},
                {"output_dir", dir.string()}};
    for (const auto& [k, v] : dir_info.items()) report[k] = v;
    int code = 0;
    try {
        const std::string& e = c.experiment;
        if (e == "interp-check") detail::run_interp(c, ctx);
        else if (e == "seq-counterexample") detail::run_seq(c, ctx);
        else if (e == "xray-selftest") detail::run_xray(c, ctx);
        else if (e == "ellipticity") detail::run_ellipticity(c, ctx);
        else if (e == "stability-sweep") detail::run_stability(c, ctx);
        else if (e == "perturbation-scan") detail::run_perturbation(c, ctx);
        else if (e == "coherent-probe") detail::run_probe(c, ctx);
        else if (e == "holder-fit") detail::run_holder(c, ctx);
        else if (e == "findim-check") detail::run_findim(c, ctx);
        else throw InvalidParameter("unknown experiment \"" + e + "\"");
        code = ctx.passed() ? 0 : 1;
    } catch (const std::exception& ex) {
        report["failed_stage"] = ctx.current_stage();
        report["error"] = ex.what();
        code = 2;
    }
    json contracts = json::array();
    for (const auto& k : ctx.contracts()) {
        contracts.push_back({{"name", k.name}, {"passed", k.passed}, {"detail", k.detail}});
    }
    report["results"] = ctx.results;
    report["contracts"] = contracts;
    report["passed"] = code == 0;
    report["stages"] = ctx.stages();
    report["outputs"] = ctx.outputs();
    std::ofstream os(dir / "report.json", std::ios::binary);
    os << report.dump(2) << '\n';
    return {report, code};
}

}  // namespace linstab::cli
