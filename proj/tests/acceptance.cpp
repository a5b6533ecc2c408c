// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "linstab/cli/config.hpp"
#include "linstab/cli/runner.hpp"
#include "linstab/holder.hpp"
#include "linstab/seqlab.hpp"
#include "linstab/spectral.hpp"
#include "linstab/stability.hpp"
#include "linstab/xray.hpp"

using namespace linstab;
using cli::format_number;
using std::numbers::pi;

namespace {

struct Outcome {
    bool ok;
    std::string detail;
};

WeightSpec hard_limited() { return WeightSpec::limited_angle(pi / 2, pi / 6, 0.1); }

Outcome interpolation() {
    const Grid g(4.0, 32);
    std::mt19937_64 rng(20240101);
    std::uniform_real_distribution<double> u(-1.0, 1.0), order(0.0, 4.0), unit(0.0, 1.0);
    const auto xi2 = frequency_norms_squared(g);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        ComplexGridFunction f(g);
        for (std::size_t k = 0; k < g.size(); ++k) f[k] = {u(rng), u(rng)};
        auto spec = to_spectral(f);
        const double decay = 3.0 * unit(rng);
        for (std::size_t k = 0; k < g.size(); ++k) spec.coefficients[k] *= std::pow(1.0 + xi2[k], -0.5 * decay);
        f = from_spectral(spec);
        double s1 = order(rng), s2 = order(rng);
        if (s1 == s2) s2 += 1.0;
        worst = std::max(worst, interpolation_check(f, s1, s2, unit(rng)));
    }
    return {worst <= 1.0 + 1e-12, "max ratio " + format_number(worst) + " over 1000 trials"};
}

Outcome sequence_example() {
    double residual = 0.0, norm_err = 0.0, growth = std::numeric_limits<double>::infinity();
    const std::vector<double> orders{0.0, 1.0, 2.0, 5.0};
    for (std::size_t k = 1; k <= 50; ++k) {
        const auto x = seq::counterexample(k, 50);
        residual = std::max(residual, seq::l2_norm(seq::seq_map(x)) / seq::l2_norm(x));
        for (double s : orders) {
            const double expect = std::exp((s + 1.0) * std::log(double(k)) - double(k));
            norm_err = std::max(norm_err, std::abs(seq::hs_norm(x, s) / expect - 1.0));
        }
    }
    for (double s1 : orders)
        for (double s2 : orders) {
            if (s1 < s2) {
                growth = std::min(growth, seq::instability_ratio(30, s1, s2).value / seq::instability_ratio(10, s1, s2).value);
            }
        }
    return {residual <= 1e-15 && norm_err <= 1e-12 && growth > 1e3,
            "residual " + format_number(residual) + ", norm error " + format_number(norm_err) +
                ", min growth 10->30 " + format_number(growth)};
}

Outcome adjoint_identities() {
    const Grid g(4.0, 24);
    const RaySet rays = RaySet::for_grid(g, 1.0);
    const std::vector<WeightSpec> kinds{
        WeightSpec::constant(1.0), hard_limited(),
        WeightSpec::tabulate(g, 16, [](Vec2 x, Vec2 t) { return 1.0 + 0.3 * x.x1 * t.x2; }),
        WeightSpec::bump({0.2, -0.1}, 0.5, 1.0, 0.4, 1.1)};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto nodes = disk_nodes(g, kSupportRadius);
    double pair = 0.0, ident = 0.0;
    for (const auto& w : kinds) {
        for (int t = 0; t < 100; ++t) {
            GridFunction f(g);
            for (auto k : nodes) f[k] = u(rng);
            Sinogram s{rays, std::vector<double>(rays.size())};
            for (auto& v : s.values) v = u(rng);
            const auto If = forward(w, f, rays);
            const auto adj = adjoint(w, s, g);
            pair = std::max(pair, std::abs(dsigma_inner(If, s) - inner(f, adj)) /
                                      (dsigma_norm(If) * dsigma_norm(s) + l2_norm(f) * l2_norm(adj)));
            const double nn = inner(normal_compose(w, f, rays), f), ii = std::pow(dsigma_norm(If), 2);
            ident = std::max(ident, std::abs(nn - ii) / std::max(ii, std::pow(l2_norm(f), 2)));
        }
    }
    return {pair <= 1e-12 && ident <= 1e-12,
            "pairing " + format_number(pair) + ", normal identity " + format_number(ident) + " (4 kinds x 100)"};
}

Outcome kernel_oracle() {
    const auto w = WeightSpec::constant(1.0);
    const std::vector<std::pair<Vec2, double>> bumps{
        {{0.0, 0.0}, 0.6}, {{0.3, -0.2}, 0.5}, {{-0.4, 0.3}, 0.45}, {{0.2, 0.4}, 0.5}, {{-0.1, -0.4}, 0.55}};
    std::vector<double> err;
    std::string detail;
    for (int n : {32, 48}) {
        const Grid g(4.0, n);
        const RaySet rays = RaySet::for_grid(g, 1.0);
        std::vector<GridFunction> fs;
        for (const auto& [c, r] : bumps) fs.push_back(smooth_bump(g, c, r));
        const double cc = calibrate_kernel_constant(w, std::span<const GridFunction>(fs), rays);
        double e = 0.0;
        for (const auto& f : fs) {
            const auto nf = normal_compose(w, f, rays, Region::outer);
            e = std::max(e, l2_norm(normal_kernel(w, f, cc, Region::outer) - nf) / l2_norm(nf));
        }
        err.push_back(e);
        detail += "N=" + std::to_string(n) + " c_cal " + format_number(cc) + " err " + format_number(e) + "; ";
    }
    return {err[1] < err[0] && err[1] < 5e-2, detail};
}

Outcome elliptic_stability() {
    const auto rep = stability_sweep(WeightSpec::constant(1.0), {16, 24, 32}, 4.0, 4.0);
    std::vector<double> s;
    for (const auto& e : rep.entries) s.push_back(e.sigma_min);
    const double spread = *std::max_element(s.begin(), s.end()) / *std::min_element(s.begin(), s.end());
    const Grid g(4.0, 16);
    const double svd = stability_constant_svd(assemble_normal_matrix(WeightSpec::constant(1.0), g, RaySet::for_grid(g, 4.0)));
    const double rel = std::abs(svd / s[0] - 1.0);
    return {spread < 2.0 && rel <= 1e-8,
            "sigma_min " + format_number(s[0]) + ", " + format_number(s[1]) + ", " + format_number(s[2]) +
                "; max/min " + format_number(spread) + "; dense SVD rel diff " + format_number(rel)};
}

Outcome instability_signature() {
    const auto el = ellipticity_margin(hard_limited(), 32);
    const bool witness = std::abs(std::abs(el.witness_covector.x1) - 1.0) < 1e-12 && std::abs(el.witness_covector.x2) < 1e-12;
    const auto rep = stability_sweep(hard_limited(), {16, 32}, 4.0, 4.0);
    const double drop = rep.entries[0].sigma_min / rep.entries[1].sigma_min;
    return {el.margin == 0.0 && witness && drop >= 10.0,
            "margin " + format_number(el.margin) + " at zeta (" + format_number(el.witness_covector.x1) + ", " +
                format_number(el.witness_covector.x2) + "); sigma_min N=16/N=32 = " + format_number(drop)};
}

Outcome coherent_probe() {
    const std::vector<double> lambdas{25, 50, 100, 200};
    const auto a = symbol_probe(WeightSpec::constant(1.0), {0.2, 0.0}, {1.0, 0.0}, lambdas);
    const auto b = symbol_probe(WeightSpec::constant(1.0), {0.2, 0.0}, {0.0, 1.0}, lambdas);
    const double last = std::abs(a.rel_err.back());
    const double iso = std::abs(b.measured.back() / a.measured.back() - 1.0);
    std::string errs;
    for (double e : a.rel_err) errs += format_number(e) + " ";
    return {last <= 0.10 && a.converging() && iso <= 0.02,
            "rel err " + errs + "; isotropy " + format_number(iso)};
}

Outcome perturbation() {
    const Grid g(4.0, 32);
    const auto r = perturbation_scan(WeightSpec::constant(1.0), WeightSpec::bump({0.3, 0.1}, 0.3, 1.0, 0.5, 0.7),
                                     {0.01, 0.05, 0.1}, g, RaySet::for_grid(g, 4.0));
    bool bounded = std::isfinite(r.lipschitz);
    for (const auto& p : r.points) bounded = bounded && p.deviation <= r.lipschitz * p.eps * (1 + 1e-12);
    return {bounded && r.points.front().deviation < r.points.back().deviation,
            "deviations " + format_number(r.points[0].deviation) + ", " + format_number(r.points[1].deviation) + ", " +
                format_number(r.points[2].deviation) + "; L " + format_number(r.lipschitz)};
}

Outcome findim() {
    int passed = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = random_cubic_map(3, 4, seed, 0.5);
        const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(m.jacobian(m.x0())).singularValues().minCoeff();
        const auto rep = findim_lipschitz_check(m, admissible_radius(m, 1.0 / sigma), 1000, seed);
        passed += (rep.passed && sigma >= 0.5 - 1e-12) ? 1 : 0;
        worst = std::max(worst, rep.max_ratio / rep.bound);
    }
    return {passed == 10, std::to_string(passed) + "/10 maps; worst ratio/bound " + format_number(worst)};
}

Outcome holder() {
    const Grid g(4.0, 24);
    const TestMap map(assemble_normal_matrix(WeightSpec::constant(1.0), g, RaySet::for_grid(g, 4.0)),
                      unit_l2(smooth_bump(g, {0.1, -0.1}, 0.6)));
    const std::vector<double> scales{1e-1, 1e-2, 1e-3, 1e-4};
    HolderOptions opt;
    opt.seed = 11;
    bool ok = true;
    std::string summary;
    const GridFunction zero(g);
    const GridFunction f1 = 0.005 * detail::bump_directions(g, 1, 99)[0];
    for (const auto* f0 : {&zero, &f1}) {
        const auto rem = remainder_bound_estimate(map, *f0, scales, 8, 11);
        const auto rep = holder_fit(map, *f0, 10.0, scales, opt);
        ok = ok && rem.stabilization() < 0.2 && rep.hypothesis_ok && std::isfinite(rep.C_hat) &&
             rep.slope >= 0.70 && rep.chain_ok() && rep.exponent() == 0.75 && !rep.samples.empty();
        summary += std::string(f0 == &zero ? "f0=0" : "f0=f1") + ": C_hat " + format_number(rep.C_hat) + " slope " +
                  format_number(rep.slope) + " remainder drift " + format_number(rem.stabilization()) + "; ";
    }
    return {ok, summary};
}

Outcome reproducibility() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "linstab_acceptance";
    fs::remove_all(base);
    const std::vector<std::string> docs{
        R"({"experiment": "interp-check", "seed": 5, "trials": 200})",
        R"({"experiment": "stability-sweep", "seed": 5, "weight": {"kind": "limited_angle"},
            "rays": {"mode": "scaled"}, "stability": {"resolutions": [16, 24], "expect": "none"}})",
        R"({"experiment": "holder-fit", "seed": 5, "grid": {"N": 16}, "rays": {"mode": "scaled"}})"};
    int files = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto v = cli::validate(docs[d]);
        if (!v.ok()) return {false, "config rejected: " + v.errors.front()};
        const auto a = cli::run(*v.config, base / (std::to_string(d) + "a"));
        const auto b = cli::run(*v.config, base / (std::to_string(d) + "b"));
        for (std::size_t k = 0; k < a.report["outputs"].size(); ++k) {
            const auto& oa = a.report["outputs"][k];
            if (oa["file"] != b.report["outputs"][k]["file"] || oa["sha256"] != b.report["outputs"][k]["sha256"]) {
                return {false, "hash mismatch in " + oa["file"].get<std::string>()};
            }
            ++files;
        }
    }
    fs::remove_all(base);
    return {files > 0, std::to_string(files) + " CSVs hash-identical across two runs"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"interpolation inequality", interpolation},
        {"sequence-space counterexample", sequence_example},
        {"adjoint pairing and normal identity", adjoint_identities},
        {"kernel vs composition", kernel_oracle},
        {"elliptic stability", elliptic_stability},
        {"limited-angle instability", instability_signature},
        {"coherent-state symbol probe", coherent_probe},
        {"perturbation continuity", perturbation},
        {"finite-dimensional Lipschitz", findim},
        {"conditional Hoelder estimate", holder},
        {"reproducibility", reproducibility}};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += o.ok ? 0 : 1;
        std::printf("%s %2zu %s: %s (%.1f s)\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), s);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
