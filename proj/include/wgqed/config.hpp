#pragma once

#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "filtering.hpp"
#include "network.hpp"

namespace wgqed {

using json = nlohmann::json;

enum class Experiment { Classify, Kernels, Simulate, Filter, Equivalence };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::Classify: return "classify";
        case Experiment::Kernels: return "kernels";
        case Experiment::Simulate: return "simulate";
        case Experiment::Filter: return "filter";
        case Experiment::Equivalence: return "equivalence";
    }
    return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
    for (auto e : {Experiment::Classify, Experiment::Kernels, Experiment::Simulate, Experiment::Filter, Experiment::Equivalence})
        if (to_string(e) == s) return e;
    throw std::invalid_argument("unknown experiment '" + s + "'");
}

struct RunConfig {
    std::string preset;  // empty when built from a file alone
    Experiment experiment = Experiment::Simulate;
    Network network;
    std::string initial_state;  // one of 'e'/'g' per atom, atom 1 first
    double dt = 0.5;
    double t_end = 50.0;
    std::size_t trajectories = 2000;
    std::uint64_t seed = 20240601;
    std::size_t workers = 1;
    CoefficientMode mode = CoefficientMode::InstantOn;
    FilterScheme scheme = FilterScheme::Instrument;
    std::size_t substeps = 10;
    bool exchange = false;
    bool strict_positivity = false;
    std::string out_dir = "out";
    // Atoms compared by the equivalence experiment.
    std::optional<Atom> multi_atom, single_atom;

    bool operator==(const RunConfig&) const = default;
};

struct ConfigError : std::runtime_error {
    std::vector<std::string> problems;
    explicit ConfigError(std::vector<std::string> p) : std::runtime_error(join(p)), problems(std::move(p)) {}

    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid configuration:";
        for (const auto& x : p) s += "\n  " + x;
        return s;
    }
};

inline DensityMatrix initial_density(const std::string& spec) {
    std::vector<bool> ex;
    for (char c : spec) {
        if (c != 'e' && c != 'g') throw std::invalid_argument("initial state must use only 'e' and 'g'");
        ex.push_back(c == 'e');
    }
    if (ex.empty()) throw std::invalid_argument("initial state is empty");
    return product_state(ex);
}

// ---- presets ----

// Nominal carrier frequency for preset delays, rad/us: tau = phi / omega.
inline constexpr double kNominalOmega = 1.0;

inline Atom point_atom(double phi, double gL, double gR, double drive, double eta = 0.0) {
    Atom a;
    a.omega_a = kNominalOmega;
    a.eta = eta;
    a.drive_amplitude = drive;
    a.points.push_back({phi / kNominalOmega, phi, gL, gR});
    return a;
}

inline RunConfig fig2_preset(double phi2, double drive1, double drive2) {
    constexpr double pi = std::numbers::pi;
    RunConfig c;
    c.experiment = Experiment::Filter;
    c.network.kind = WaveguideKind::SemiInfinite;
    c.network.port = Port::SemiInfiniteEnd;
    c.network.omega_a = kNominalOmega;
    c.network.atoms = {point_atom(0.3 * pi, 0.2, 0.2, drive1), point_atom(phi2, 0.4, 0.4, drive2)};
    c.initial_state = "eg";
    return c;
}

inline RunConfig fig3_preset(double eta) {
    constexpr double pi = std::numbers::pi;
    RunConfig c;
    c.experiment = Experiment::Filter;
    c.network.kind = WaveguideKind::Infinite;
    c.network.port = Port::InfiniteRight;
    c.network.omega_a = kNominalOmega;
    c.network.atoms = {point_atom(pi, 0.1, 0.1, 0.0, eta), point_atom(2 * pi, 0.2, 0.2, 0.5, eta), point_atom(3 * pi, 0.3, 0.3, 0.0, eta)};
    c.initial_state = "egg";
    return c;
}

inline std::vector<std::string> preset_names() { return {"fig2a", "fig2b", "fig3a", "fig3b", "decay", "equivalence"}; }

inline RunConfig preset(const std::string& name) {
    constexpr double pi = std::numbers::pi;
    RunConfig c;
    if (name == "fig2a") {
        c = fig2_preset(1.3 * pi, 0.1, 0.0);
    } else if (name == "fig2b") {
        c = fig2_preset(0.8 * pi, 0.0, 0.2);
    } else if (name == "fig3a") {
        c = fig3_preset(0.0);
    } else if (name == "fig3b") {
        c = fig3_preset(0.2);
    } else if (name == "decay") {
        // One atom emitting only toward the open end: a single Markovian channel.
        c.experiment = Experiment::Simulate;
        c.network.kind = WaveguideKind::SemiInfinite;
        c.network.port = Port::SemiInfiniteEnd;
        c.network.omega_a = kNominalOmega;
        c.network.atoms = {point_atom(1.0, 0.0, 0.2, 0.0)};
        c.initial_state = "e";
        c.t_end = 25.0;
    } else if (name == "equivalence") {
        // Two co-phased points whose sqrt-rates add up to one point of rate 0.2.
        c.experiment = Experiment::Equivalence;
        c.network = fig3_preset(0.0).network;
        Atom multi;
        multi.omega_a = kNominalOmega;
        multi.points = {{0.5, 0.5, 0.05, 0.05}, {0.5 + 2 * pi, 0.5 + 2 * pi, 0.05, 0.05}};
        const double s = std::sqrt(0.05) + std::sqrt(0.05);
        Atom single = point_atom(0.5, s * s, s * s, 0.0);
        c.multi_atom = multi;
        c.single_atom = single;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    c.preset = name;
    return c;
}

// ---- JSON ----

inline json to_json(const CouplingPoint& p) { return {{"tau", p.tau}, {"phi", p.phi}, {"gammaL", p.gammaL}, {"gammaR", p.gammaR}}; }

inline json to_json(const Atom& a) {
    json pts = json::array();
    for (const auto& p : a.points) pts.push_back(to_json(p));
    return {{"omega_a", a.omega_a}, {"eta", a.eta}, {"drive", a.drive_amplitude}, {"points", pts}};
}

inline json to_json(const Network& n) {
    json atoms = json::array();
    for (const auto& a : n.atoms) atoms.push_back(to_json(a));
    json j = {{"kind", to_string(n.kind)}, {"port", to_string(n.port)}, {"atoms", atoms}, {"phase_tolerance", n.phase_tolerance}};
    if (n.omega_a) j["omega_a"] = *n.omega_a;
    return j;
}

inline json to_json(const RunConfig& c) {
    json j = {{"experiment", to_string(c.experiment)},
              {"network", to_json(c.network)},
              {"initial_state", c.initial_state},
              {"dt", c.dt},
              {"t_end", c.t_end},
              {"trajectories", c.trajectories},
              {"seed", c.seed},
              {"workers", c.workers},
              {"mode", to_string(c.mode)},
              {"scheme", to_string(c.scheme)},
              {"substeps", c.substeps},
              {"exchange", c.exchange},
              {"strict_positivity", c.strict_positivity},
              {"out_dir", c.out_dir}};
    if (!c.preset.empty()) j["preset"] = c.preset;
    if (c.multi_atom) j["multi_atom"] = to_json(*c.multi_atom);
    if (c.single_atom) j["single_atom"] = to_json(*c.single_atom);
    return j;
}

namespace detail {

// Reads j[key] into out when present; type problems are collected, not thrown.
template <class T>
void read(const json& j, const char* key, T& out, const std::string& where, std::vector<std::string>& errs) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        errs.push_back(where + key + ": " + e.what());
    }
}

inline CouplingPoint point_from(const json& j, const std::string& where, std::vector<std::string>& errs) {
    CouplingPoint p;
    if (!j.is_object()) {
        errs.push_back(where + "must be an object");
        return p;
    }
    for (const char* k : {"tau", "phi", "gammaL", "gammaR"})
        if (!j.contains(k)) errs.push_back(where + k + ": missing");
    read(j, "tau", p.tau, where, errs);
    read(j, "phi", p.phi, where, errs);
    read(j, "gammaL", p.gammaL, where, errs);
    read(j, "gammaR", p.gammaR, where, errs);
    return p;
}

inline Atom atom_from(const json& j, const std::string& where, std::vector<std::string>& errs) {
    Atom a;
    if (!j.is_object()) {
        errs.push_back(where + "must be an object");
        return a;
    }
    read(j, "omega_a", a.omega_a, where, errs);
    read(j, "eta", a.eta, where, errs);
    read(j, "drive", a.drive_amplitude, where, errs);
    if (!j.contains("points") || !j["points"].is_array()) {
        errs.push_back(where + "points: missing or not an array");
        return a;
    }
    for (std::size_t n = 0; n < j["points"].size(); ++n)
        a.points.push_back(point_from(j["points"][n], where + "points[" + std::to_string(n) + "].", errs));
    return a;
}

inline Network network_from(const json& j, std::vector<std::string>& errs) {
    Network n;
    const std::string w = "network.";
    if (!j.is_object()) {
        errs.push_back("network: must be an object");
        return n;
    }
    try {
        if (j.contains("kind")) n.kind = kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("port"))
            n.port = port_from_string(j.at("port").get<std::string>());
        else
            n.port = n.kind == WaveguideKind::SemiInfinite ? Port::SemiInfiniteEnd : Port::InfiniteRight;
    } catch (const std::exception& e) {
        errs.push_back(w + e.what());
    }
    if (j.contains("omega_a")) {
        double om = 0.0;
        read(j, "omega_a", om, w, errs);
        n.omega_a = om;
    }
    read(j, "phase_tolerance", n.phase_tolerance, w, errs);
    if (!j.contains("atoms") || !j["atoms"].is_array()) {
        errs.push_back(w + "atoms: missing or not an array");
        return n;
    }
    for (std::size_t a = 0; a < j["atoms"].size(); ++a)
        n.atoms.push_back(atom_from(j["atoms"][a], w + "atoms[" + std::to_string(a) + "].", errs));
    return n;
}

} // namespace detail

// Every problem with a configuration, empty when usable.
inline std::vector<std::string> check(const RunConfig& c) {
    std::vector<std::string> errs;
    for (const auto& v : validate(c.network)) errs.push_back("network: " + v);
    if (!(c.dt > 0)) errs.push_back("dt must be positive");
    if (!(c.t_end >= c.dt)) errs.push_back("t_end must be at least dt");
    if (c.dt > 0 && c.t_end >= c.dt) {
        try {
            step_count(c.t_end, c.dt);
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
    }
    if (c.experiment == Experiment::Simulate || c.experiment == Experiment::Filter) {
        if (c.initial_state.size() != c.network.size())
            errs.push_back("initial_state needs one of 'e'/'g' per atom");
        else if (c.initial_state.find_first_not_of("eg") != std::string::npos)
            errs.push_back("initial_state must use only 'e' and 'g'");
    }
    if (c.experiment == Experiment::Filter) {
        if (c.trajectories == 0) errs.push_back("trajectories must be positive");
        if (c.substeps == 0) errs.push_back("substeps must be positive");
    }
    if (c.workers == 0) errs.push_back("workers must be positive");
    if (c.experiment == Experiment::Equivalence && (!c.multi_atom || !c.single_atom))
        errs.push_back("equivalence needs multi_atom and single_atom");
    return errs;
}

// Builds a configuration from JSON; a "preset" key supplies defaults that other keys override.
inline RunConfig config_from_json(const json& j) {
    std::vector<std::string> errs;
    RunConfig c;
    if (!j.is_object()) throw ConfigError({"configuration root must be an object"});
    if (j.contains("preset")) {
        try {
            c = preset(j.at("preset").get<std::string>());
        } catch (const std::exception& e) {
            errs.push_back(std::string("preset: ") + e.what());
        }
    }
    try {
        if (j.contains("experiment")) c.experiment = experiment_from_string(j.at("experiment").get<std::string>());
        if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    } catch (const std::exception& e) {
        errs.push_back(e.what());
    }
    if (j.contains("network")) c.network = detail::network_from(j["network"], errs);
    detail::read(j, "initial_state", c.initial_state, "", errs);
    detail::read(j, "dt", c.dt, "", errs);
    detail::read(j, "t_end", c.t_end, "", errs);
    detail::read(j, "trajectories", c.trajectories, "", errs);
    detail::read(j, "seed", c.seed, "", errs);
    detail::read(j, "workers", c.workers, "", errs);
    detail::read(j, "substeps", c.substeps, "", errs);
    detail::read(j, "exchange", c.exchange, "", errs);
    detail::read(j, "strict_positivity", c.strict_positivity, "", errs);
    detail::read(j, "out_dir", c.out_dir, "", errs);
    if (j.contains("multi_atom")) c.multi_atom = detail::atom_from(j["multi_atom"], "multi_atom.", errs);
    if (j.contains("single_atom")) c.single_atom = detail::atom_from(j["single_atom"], "single_atom.", errs);
    if (errs.empty())
        for (auto& e : check(c)) errs.push_back(std::move(e));
    if (!errs.empty()) throw ConfigError(errs);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({path + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what()});
    }
    return config_from_json(j);
}

} // namespace wgqed
