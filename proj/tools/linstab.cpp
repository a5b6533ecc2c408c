// linstab: run or validate experiment configs.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "linstab/cli/config.hpp"
#include "linstab/cli/runner.hpp"

namespace {

std::optional<std::string> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// A --seed flag overrides the config's seed before validation, so a config
// without one is accepted when the flag is given.
std::string with_seed(const std::string& text, std::optional<std::uint64_t> seed) {
    if (!seed) return text;
    auto doc = linstab::cli::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return text;
    doc["seed"] = *seed;
    return doc.dump();
}

int report_errors(const std::string& path, const std::vector<std::string>& errors) {
    for (const auto& e : errors) std::cerr << path << ": " << e << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linstab: stability experiments for weighted X-ray transforms"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run an experiment and write CSVs plus report.json");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--output-dir", output_dir, "overrides LINSTAB_OUTPUT_DIR and the config");
    run->add_option("--seed", seed, "overrides the config seed");

    auto* check = app.add_subcommand("validate", "check a config and print the effective settings");
    check->add_option("--config", config_path, "experiment config (JSON)")->required();
    check->add_option("--seed", seed, "overrides the config seed");

    CLI11_PARSE(app, argc, argv);

    const auto text = slurp(config_path);
    if (!text) {
        std::cerr << config_path << ": cannot read file\n";
        return 2;
    }
    const auto v = linstab::cli::validate(with_seed(*text, seed));
    if (!v.ok()) return report_errors(config_path, v.errors);
    const auto& c = *v.config;

    if (check->parsed()) {
        std::cout << c.echo.dump(2) << '\n';
        return 0;
    }

    std::string dir = c.output_dir;
    std::string source = "config";
    const char* env = std::getenv("LINSTAB_OUTPUT_DIR");
    if (output_dir) {
        dir = *output_dir;
        source = "flag";
    } else if (env && *env) {
        dir = env;
        source = "env";
    }
    linstab::cli::json info{{"output_dir_source", source},
                            {"env_LINSTAB_OUTPUT_DIR", env ? linstab::cli::json(env) : linstab::cli::json(nullptr)}};
    try {
        const auto outcome = linstab::cli::run(c, dir, info);
        for (const auto& k : outcome.report["contracts"]) {
            std::cout << (k["passed"].get<bool>() ? "PASS " : "FAIL ") << k["name"].get<std::string>();
            const auto d = k["detail"].get<std::string>();
            if (!d.empty()) std::cout << " [" << d << "]";
            std::cout << '\n';
        }
        if (outcome.exit_code == 2) {
            std::cerr << "stage \"" << outcome.report["failed_stage"].get<std::string>()
                      << "\" failed: " << outcome.report["error"].get<std::string>() << '\n';
        }
        std::cout << "report: " << (std::filesystem::path(dir) / "report.json").string() << '\n';
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
