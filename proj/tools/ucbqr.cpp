#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ucbqr/config_io.hpp"
#include "ucbqr/experiment.hpp"

using namespace ucbqr;

namespace {

void print_cells(const ExperimentResult& result) {
    for (const CellResult& c : result.cells) {
        std::printf("%-16s", c.label.c_str());
        if (c.sweep_value) std::printf(" @ %-8g", *c.sweep_value);
        if (!c.ok()) {
            std::printf(" FAILED (%d replications): %s\n", c.failed_replications, c.error.c_str());
            continue;
        }
        std::printf(" payoff %.2f  per-completion %.4f  mean wait %.2f s", c.report.total_payoff,
                    c.report.payoff_per_completion, c.report.mean_wait);
        if (c.report.payoff_relative_to_oracle)
            std::printf("  vs oracle %.4f", *c.report.payoff_relative_to_oracle);
        std::printf("\n");
    }
}

int execute(const ExperimentConfig& config, ExperimentResult& result) {
    RunOptions opts;
    opts.workers = default_worker_count();
    try {
        result = run_experiment(config, opts);
    } catch (const ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    print_cells(result);
    std::cout << "reports written to " << config.output_dir << "\n";
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skill-based queue simulator and learning router"};
    app.require_subcommand(1);

    std::string run_path;
    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("config", run_path, "experiment config file")->required();

    std::string preset_name;
    std::string out_dir;
    int replications = 0;
    std::uint64_t seed = 0;
    auto* preset = app.add_subcommand("preset", "run a built-in experiment");
    preset->add_option("name", preset_name, "preset name")->required();
    preset->add_option("--out", out_dir, "output directory");
    preset->add_option("--replications", replications, "replications per cell")->check(CLI::PositiveNumber);
    preset->add_option("--seed", seed, "experiment seed");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "parse a config and check its scenario");
    validate->add_option("config", validate_path, "experiment config file")->required();

    auto* list = app.add_subcommand("presets", "list built-in presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*list) {
        for (const auto& n : preset_names()) std::cout << n << "\n";
        return 0;
    }

    if (*validate || *run) {
        ExperimentConfig config;
        try {
            config = load_experiment_config(*run ? run_path : validate_path);
        } catch (const ConfigParseError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
        if (*run) {
            ExperimentResult result;
            return execute(config, result);
        }
        try {
            const Scenario sc = build_scenario(config.scenario);
            auto violations = validate_config(sc.config);
            for (const NamedPolicy& p : config.policies)
                for (auto& v : validate_policy(p.spec, sc.config)) violations.push_back(v);
            for (const Violation& v : violations) std::cerr << v.field << ": " << v.message << "\n";
            if (!violations.empty()) return 3;
            std::cout << "ok: " << sc.config.num_types << " types, " << sc.config.num_servers
                      << " servers, " << sc.config.lines.size() << " lines, "
                      << config.policies.size() << " policies\n";
        } catch (const std::exception& e) {
            std::cerr << "scenario error: " << e.what() << "\n";
            return 3;
        }
        return 0;
    }

    ExperimentConfig config;
    try {
        config = make_preset(preset_name);
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (replications > 0) config.replications = replications;
    if (preset->count("--seed")) config.seed = seed;
    ExperimentResult result;
    const int code = execute(config, result);
    if (preset_name == "appendix-d" && !result.cells.empty() && result.cells.front().ok()) {
        bool all = true;
        for (const BandCheck& b : appendix_d_checks(result.cells.front().report)) {
            std::printf("%s %-10s %.4f (target %.3f +/- %.2f)\n", b.pass ? "PASS" : "FAIL",
                        b.name.c_str(), b.value, b.target, b.tolerance);
            all = all && b.pass;
        }
        if (!all && code == 0) return 1;
    }
    return code;
}
