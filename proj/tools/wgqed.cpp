#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

struct Overrides {
    std::string preset, config, out_dir, mode, scheme, initial_state;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trajectories, workers, substeps;
    std::optional<double> dt, t_end;
    bool strict_positivity = false, exchange = false, records = false, list_presets = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--preset", o.preset, "built-in scenario name");
    cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", o.out_dir, "directory for CSV and JSON output");
    cmd->add_option("--seed", o.seed, "base seed for trajectory streams");
    cmd->add_option("--trajectories,-M", o.trajectories, "number of filter trajectories");
    cmd->add_option("--dt", o.dt, "output grid step, us");
    cmd->add_option("--t-end", o.t_end, "final time, us");
    cmd->add_option("--workers", o.workers, "worker threads for the ensemble");
    cmd->add_option("--mode", o.mode, "coefficient switch-on")->check(CLI::IsMember({"activated", "instant-on"}));
    cmd->add_option("--scheme", o.scheme, "filter update")->check(CLI::IsMember({"instrument", "euler"}));
    cmd->add_option("--substeps", o.substeps, "filter substeps per grid step");
    cmd->add_option("--initial-state", o.initial_state, "product state such as 'eg'");
    cmd->add_flag("--strict-positivity", o.strict_positivity, "abort a trajectory on eigenvalues below -1e-3");
    cmd->add_flag("--exchange", o.exchange, "use the exchange-Hamiltonian form of the master equation");
}

wgqed::RunConfig resolve(const Overrides& o, wgqed::Experiment exp) {
    wgqed::RunConfig c;
    if (!o.config.empty()) {
        c = wgqed::load_config(o.config);
        if (!o.preset.empty()) throw std::invalid_argument("use either --preset or --config, not both");
    } else if (!o.preset.empty()) {
        c = wgqed::preset(o.preset);
    } else {
        throw std::invalid_argument("one of --preset or --config is required");
    }
    c.experiment = exp;
    if (!o.out_dir.empty()) c.out_dir = o.out_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.trajectories) c.trajectories = *o.trajectories;
    if (o.dt) c.dt = *o.dt;
    if (o.t_end) c.t_end = *o.t_end;
    if (o.workers) c.workers = *o.workers;
    if (o.substeps) c.substeps = *o.substeps;
    if (!o.mode.empty()) c.mode = wgqed::mode_from_string(o.mode);
    if (!o.scheme.empty()) c.scheme = wgqed::scheme_from_string(o.scheme);
    if (!o.initial_state.empty()) c.initial_state = o.initial_state;
    if (o.strict_positivity) c.strict_positivity = true;
    if (o.exchange) c.exchange = true;
    if (auto errs = wgqed::check(c); !errs.empty()) throw wgqed::ConfigError(errs);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Waveguide QED networks: noise kernels, master equations and homodyne filtering"};
    app.require_subcommand(0, 1);
    Overrides o;
    app.add_flag("--list-presets", o.list_presets, "print built-in preset names");

    const std::pair<const char*, wgqed::Experiment> subs[] = {
        {"classify", wgqed::Experiment::Classify},
        {"kernels", wgqed::Experiment::Kernels},
        {"simulate", wgqed::Experiment::Simulate},
        {"filter", wgqed::Experiment::Filter},
        {"equivalence", wgqed::Experiment::Equivalence},
    };
    const char* help[] = {
        "Markovianity verdict with witness term",
        "channel and commutator kernels, Ito table, master-equation coefficients",
        "deterministic master-equation evolution",
        "homodyne filter ensemble",
        "check that two atoms give the same Markov-approximated dynamics",
    };
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        auto* cmd = app.add_subcommand(subs[i].first, help[i]);
        add_common(cmd, o);
        cmds.push_back(cmd);
    }
    cmds[3]->add_flag("--records", o.records, "also write per-trajectory expectations and increments");

    CLI11_PARSE(app, argc, argv);

    if (o.list_presets) {
        for (const auto& n : wgqed::preset_names()) std::cout << n << "\n";
        return 0;
    }
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!cmds[i]->parsed()) continue;
        try {
            const wgqed::RunConfig cfg = resolve(o, subs[i].second);
            return wgqed::cli::run(cfg, std::cout, {o.records});
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    std::cout << app.help();
    return 0;
}
