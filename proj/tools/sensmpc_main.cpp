#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sensmpc/scenario.hpp"

namespace {

std::vector<sensmpc::Warmstart> parse_modes(const std::string& csv) {
    std::vector<sensmpc::Warmstart> modes;
    size_t start = 0;
    while (start <= csv.size()) {
        const size_t comma = csv.find(',', start);
        const std::string token =
            csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!token.empty()) modes.push_back(sensmpc::warmstart_from_string(token));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (modes.empty()) throw std::invalid_argument("--modes: no modes given");
    return modes;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensitivity-warmstarted nonlinear MPC scenario runner"};
    app.require_subcommand(1);

    std::string config_path, modes_csv, out_dir;
    long long seed = -1;

    auto* run = app.add_subcommand("run", "Run the closed-loop scenario(s) from a config file");
    run->add_option("config", config_path, "Scenario config (JSON)")->required();
    run->add_option("--modes", modes_csv, "Comma-separated warmstart modes overriding the config");
    run->add_option("--out", out_dir, "Output directory overriding the config");
    run->add_option("--seed", seed, "RNG seed overriding the config");

    auto* check = app.add_subcommand("check", "Validate a config and run the derivative checks");
    check->add_option("config", config_path, "Scenario config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        sensmpc::ScenarioConfig cfg = sensmpc::load_config(config_path);
        if (run->parsed()) {
            if (!modes_csv.empty()) cfg.modes = parse_modes(modes_csv);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (seed >= 0) cfg.seed = static_cast<unsigned long>(seed);
            return sensmpc::run_scenario(cfg);
        }
        // check
        sensmpc::DerivativeReport report = sensmpc::check_scenario(cfg);
        std::printf("derivative check for scenario %s:\n", cfg.scenario.c_str());
        for (const auto& [block, err] : report.block_errors)
            std::printf("  %-26s %.3e\n", block.c_str(), err);
        const double worst = report.max_error();
        std::printf("max relative error: %.3e (%s)\n", worst, worst <= 1e-5 ? "ok" : "TOO LARGE");
        return worst <= 1e-5 ? 0 : 1;
    } catch (const sensmpc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
