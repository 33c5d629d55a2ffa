#include "rca/pipeline.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned jobs = 1;
    std::optional<double> cis_alpha;
    std::string scenario;
    std::string input;
};

rca::PipelineConfig build_config(const Overrides& o) {
    rca::PipelineConfig cfg = o.config.empty() ? rca::PipelineConfig{} : rca::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.out_dir = o.out;
    cfg.jobs = o.jobs;
    if (o.cis_alpha) cfg.cis.cis_alpha = *o.cis_alpha;
    if (!o.scenario.empty()) {
        cfg.scenario = o.scenario;
        cfg.scenario_file.clear();
    }
    if (!o.input.empty()) cfg.panel = o.input;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Root cause analysis for KPI telemetry: SLA labeling, RCD, lagged causal subgraphs, "
                 "deviation sequences and Monte Carlo tuning."};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "INI configuration file");
    app.add_option("--seed", o.seed, "Base seed for every random stream");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--jobs", o.jobs, "Worker threads for rcd and tune")->check(CLI::PositiveNumber);
    app.add_option("--cis-alpha", o.cis_alpha, "Override cis alpha");
    app.add_option("--scenario", o.scenario, "Canned scenario: cascade, null, single-root");
    app.add_option("--input", o.input, "Panel CSV (overrides [input] panel)");

    using Command = std::function<rca::Bundle(const rca::PipelineConfig&)>;
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"synth", "Simulate a scenario: panel.csv and ground_truth.json", rca::cmd_synth},
        {"label", "Label normal and abnormal windows", rca::cmd_label},
        {"discover", "Multi-run RCD frequency table", rca::cmd_discover},
        {"subgraph", "Lagged causal subgraph of the normal window", rca::cmd_subgraph},
        {"sequence", "Causal intervention sequence", rca::cmd_sequence},
        {"tune", "Monte Carlo sweep over g and n", rca::cmd_tune},
        {"compare-states", "Diff of normal and abnormal subgraphs", rca::cmd_compare_states},
        {"run-all", "Label, RCD, subgraph, sequence and reports", rca::cmd_run_all},
    };
    for (const auto& [name, help, _] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return rca::exit_codes::usage;
    }

    try {
        const auto cfg = build_config(o);
        for (const auto& [name, help, run] : commands) {
            if (!app.got_subcommand(name)) continue;
            const auto bundle = run(cfg);
            rca::write_bundle(bundle, cfg.out_dir);
            for (const auto& [file, _] : bundle) std::cout << (cfg.out_dir / file).string() << '\n';
        }
        return rca::exit_codes::ok;
    } catch (const std::exception& e) {
        std::cerr << "rca: error: " << e.what() << '\n';
        return rca::exit_code_for(e);
    }
}
