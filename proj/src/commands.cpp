#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>

#include <wgqed/wgqed.hpp>

namespace wgqed::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
    std::ostringstream s;
    s << std::setprecision(prec) << v;
    return s.str();
}

std::string fmt(cplx v) {
    std::ostringstream s;
    s << std::setprecision(6) << v.real() << (v.imag() < 0 ? " - " : " + ") << std::abs(v.imag()) << "i";
    return s.str();
}

json complex_json(cplx v) { return json::array({v.real(), v.imag()}); }

json kernel_json(const DelayKernel& k) {
    json terms = json::array();
    for (const auto& t : k.terms())
        terms.push_back({{"weight", complex_json(t.weight)}, {"delay", t.delay}, {"phase", t.phase}});
    return terms;
}

void print_kernel(std::ostream& out, const std::string& label, const DelayKernel& k) {
    out << "  " << std::left << std::setw(22) << label;
    if (k.empty()) out << "(empty)";
    for (std::size_t i = 0; i < k.terms().size(); ++i) {
        const auto& t = k.terms()[i];
        out << (i ? "\n" + std::string(24, ' ') : "") << std::setw(26) << fmt(t.weight) << " @ delay " << fmt(t.delay);
    }
    out << "\n";
}

void write_summary(const RunConfig& cfg, const std::string& name, const json& extra, double wall) {
    write_text(fs::path(cfg.out_dir) / name, summary_json(cfg, extra, wall).dump(2) + "\n");
}

json verdict_json(const MarkovVerdict& v) {
    json j = {{"markovian", v.markovian}, {"reason", v.reason}};
    if (v.witness)
        j["witness"] = {{"atoms", {v.j + 1, v.l + 1}}, {"weight", complex_json(v.witness->weight)}, {"delay", v.witness->delay}};
    return j;
}

} // namespace

int classify(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = Clock::now();
    const MarkovVerdict v = is_markovian(cfg.network);
    out << "topology   " << to_string(cfg.network.kind) << ", " << cfg.network.size() << " atom(s)\n";
    out << "verdict    " << (v.markovian ? "Markovian" : "non-Markovian") << "\n";
    out << "reason     " << v.reason << "\n";
    if (v.witness)
        out << "witness    atoms (" << v.j + 1 << "," << v.l + 1 << ") term " << fmt(v.witness->weight) << " at delay "
            << fmt(v.witness->delay) << " us\n";
    write_summary(cfg, "classify.json", {{"verdict", verdict_json(v)}}, seconds_since(t0));
    return 0;
}

int kernels(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = Clock::now();
    const Network& net = cfg.network;
    json j;
    const bool semi = net.kind == WaveguideKind::SemiInfinite;
    const std::vector<Channel> channels =
        semi ? std::vector<Channel>{Channel::SemiTilde, Channel::SemiOutput}
             : std::vector<Channel>{Channel::InfInputRight, Channel::InfInputLeft, Channel::InfRight, Channel::InfLeft};

    out << "channel kernels (weight sqrt(MHz) @ delay us)\n";
    json ch = json::array();
    for (std::size_t a = 0; a < net.size(); ++a)
        for (Channel c : channels) {
            const DelayKernel k = channel_kernel(net, a, c);
            print_kernel(out, "atom " + std::to_string(a + 1) + " " + to_string(c), k);
            ch.push_back({{"atom", a + 1}, {"channel", to_string(c)}, {"terms", kernel_json(k)}});
        }
    j["channel_kernels"] = ch;

    out << "input-noise commutator kernels (MHz @ delay us)\n";
    json pk = json::array();
    for (std::size_t a = 0; a < net.size(); ++a)
        for (std::size_t b = 0; b < net.size(); ++b) {
            const DelayKernel k = pair_kernel(net, a, b);
            print_kernel(out, "[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]", k);
            pk.push_back({{"atoms", {a + 1, b + 1}}, {"terms", kernel_json(k)}});
        }
    j["commutator_kernels"] = pk;

    out << "Ito table at dt = " << fmt(cfg.dt) << " us (MHz)\n";
    try {
        const ItoTable it = ito_table(net, cfg.dt);
        json rows = json::array();
        for (std::size_t a = 0; a < it.n; ++a) {
            json row = json::array();
            out << "  ";
            for (std::size_t b = 0; b < it.n; ++b) {
                out << std::setw(26) << fmt(it.entries(a, b));
                row.push_back(complex_json(it.entries(a, b)));
            }
            out << "\n";
            rows.push_back(row);
        }
        j["ito_table"] = {{"dt", cfg.dt}, {"entries", rows}};
    } catch (const std::domain_error& e) {
        out << "  unavailable: " << e.what() << "\n";
        j["ito_table"] = {{"dt", cfg.dt}, {"error", e.what()}};
    }

    out << "master-equation coefficients (amplitude MHz, activation us)\n";
    const CoefficientTable tab = coefficient_table(net);
    json co = json::array();
    for (std::size_t a = 0; a < net.size(); ++a)
        for (std::size_t b = 0; b < net.size(); ++b) {
            out << "  (" << a + 1 << "," << b + 1 << ")";
            json e = json::array();
            for (const auto& en : tab.at(a, b)) {
                out << "  " << fmt(en.amplitude) << " from " << fmt(en.activation);
                e.push_back({{"amplitude", complex_json(en.amplitude)}, {"activation", en.activation}});
            }
            out << "\n";
            co.push_back({{"atoms", {a + 1, b + 1}}, {"entries", e}});
        }
    j["coefficients"] = co;
    j["verdict"] = verdict_json(is_markovian(net));
    write_summary(cfg, "kernels.json", j, seconds_since(t0));
    return 0;
}

int simulate(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = Clock::now();
    const DensityMatrix rho0 = initial_density(cfg.initial_state);
    MasterOptions opt;
    opt.mode = cfg.mode;
    opt.exchange = cfg.exchange;
    opt.substeps = cfg.substeps;
    const EvolutionResult r = evolve_master(cfg.network, rho0, cfg.t_end, cfg.dt, opt);
    const auto obs = default_observables(cfg.network.size());
    const Table t = evolution_table(r, obs);
    write_text(fs::path(cfg.out_dir) / "simulate.csv", t.to_csv());
    json extra = {{"residuals", residuals_json(r.residuals)}, {"steps", r.times.size() - 1}};
    if (r.violation) extra["violation"] = *r.violation;
    write_summary(cfg, "simulate.json", extra, seconds_since(t0));

    out << "simulated " << r.times.size() - 1 << " steps to t = " << fmt(r.times.back()) << " us (" << to_string(cfg.mode) << ", " << cfg.substeps << " RK4 substeps"
        << (cfg.exchange ? ", exchange form" : "") << ")\n";
    out << "final    ";
    for (std::size_t i = 0; i < obs.size(); ++i) out << " " << obs[i].name << "=" << fmt(t.columns[i + 1].back());
    out << "\nresiduals trace " << fmt(r.residuals.trace_drift, 3) << ", hermiticity " << fmt(r.residuals.hermiticity, 3)
        << ", min eigenvalue " << fmt(r.residuals.min_eigenvalue, 3) << "\n";
    if (r.violation) out << "warning: " << *r.violation << "\n";
    out << "wrote " << (fs::path(cfg.out_dir) / "simulate.csv").string() << "\n";
    return r.violation ? 2 : 0;
}

int filter(const RunConfig& cfg, std::ostream& out, const Extras& extras) {
    const auto t0 = Clock::now();
    const DensityMatrix rho0 = initial_density(cfg.initial_state);
    FilterOptions opt;
    opt.scheme = cfg.scheme;
    opt.mode = cfg.mode;
    opt.substeps = cfg.substeps;
    opt.strict_positivity = cfg.strict_positivity;
    opt.keep_increments = extras.records;
    const FilterPlan plan(cfg.network, cfg.t_end, cfg.dt, opt);
    const auto obs = default_observables(cfg.network.size());
    const EnsembleResult r = run_ensemble(plan, rho0, obs, cfg.trajectories, cfg.seed, cfg.workers, extras.records);
    write_text(fs::path(cfg.out_dir) / "filter.csv", ensemble_table(r).to_csv());

    if (extras.records) {
        std::string csv = "trajectory,t";
        for (const auto& o : obs) csv += "," + o.name;
        csv += "\n";
        for (const auto& rec : r.records)
            for (std::size_t p = 0; p < rec.times.size(); ++p) {
                csv += std::to_string(rec.index) + "," + format_double(rec.times[p]);
                for (const auto& e : rec.expect) csv += "," + format_double(e[p]);
                csv += "\n";
            }
        write_text(fs::path(cfg.out_dir) / "trajectories.csv", csv);
        std::string inc = "trajectory,t,dW,dY\n";
        for (const auto& rec : r.records)
            for (std::size_t i = 0; i < rec.dW.size(); ++i)
                inc += std::to_string(rec.index) + "," + format_double(static_cast<double>(i) * rec.step) + "," + format_double(rec.dW[i]) +
                       "," + format_double(rec.dY[i]) + "\n";
        write_text(fs::path(cfg.out_dir) / "increments.csv", inc);
    }

    json inst = json::array();
    for (const auto& i : plan.instruments())
        inst.push_back({{"fit_error", i.fit_error()}, {"clipped_weight", i.clipped_weight()}, {"unobserved_kraus", i.unobserved_count()}});
    json extra = {{"residuals", ensemble_residuals_json(r)}, {"trajectories", r.M}, {"instruments", inst}};
    write_summary(cfg, "filter.json", extra, seconds_since(t0));

    out << "filtered " << r.M << " trajectories, " << r.times.size() - 1 << " steps of " << fmt(cfg.dt) << " us (" << to_string(cfg.scheme)
        << ", " << cfg.substeps << " substeps, " << to_string(cfg.mode) << ")\n";
    out << "final mean";
    for (std::size_t i = 0; i < r.names.size(); ++i) out << " " << r.names[i] << "=" << fmt(r.mean[i].back()) << "+-" << fmt(r.se[i].back(), 2);
    out << "\nmin eigenvalue " << fmt(r.min_eigenvalue, 3) << ", max purity " << fmt(r.max_purity, 10) << ", excursions below -1e-3 "
        << r.positivity_excursions << "\n";
    out << "wrote " << (fs::path(cfg.out_dir) / "filter.csv").string() << "\n";
    return 0;
}

int equivalence(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = Clock::now();
    const EquivalenceResult r = equivalence_check(*cfg.multi_atom, *cfg.single_atom, cfg.network.kind);
    out << "verdict    " << (r.equivalent ? "equivalent" : "not equivalent") << " (" << to_string(cfg.network.kind) << ")\n";
    out << "residuals ";
    for (double x : r.residuals) out << " " << fmt(x, 3);
    out << "\n";
    write_summary(cfg, "equivalence.json", {{"equivalent", r.equivalent}, {"residuals", r.residuals}}, seconds_since(t0));
    return r.equivalent ? 0 : 1;
}

int run(const RunConfig& cfg, std::ostream& out, const Extras& extras) {
    switch (cfg.experiment) {
        case Experiment::Classify: return classify(cfg, out);
        case Experiment::Kernels: return kernels(cfg, out);
        case Experiment::Simulate: return simulate(cfg, out);
        case Experiment::Filter: return filter(cfg, out, extras);
        case Experiment::Equivalence: return equivalence(cfg, out);
    }
    return 1;
}

} // namespace wgqed::cli
