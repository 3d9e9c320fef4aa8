#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "dynamics.hpp"
#include "filtering.hpp"

namespace wgqed {

// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, end);
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;  // same length each

    std::string to_csv() const {
        std::string out;
        for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
        out += '\n';
        const std::size_t rows = columns.empty() ? 0 : columns.front().size();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < columns.size(); ++c) {
                if (c) out += ',';
                out += format_double(columns[c][r]);
            }
            out += '\n';
        }
        return out;
    }
};

inline Table evolution_table(const EvolutionResult& r, const std::vector<Observable>& obs) {
    Table t;
    t.header.push_back("t");
    t.columns.push_back(r.times);
    auto vals = expectations(r.states, obs);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        t.header.push_back(obs[i].name);
        t.columns.push_back(std::move(vals[i]));
    }
    return t;
}

inline Table ensemble_table(const EnsembleResult& r) {
    Table t;
    t.header.push_back("t");
    t.columns.push_back(r.times);
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        t.header.push_back(r.names[i] + "_mean");
        t.columns.push_back(r.mean[i]);
        t.header.push_back(r.names[i] + "_se");
        t.columns.push_back(r.se[i]);
    }
    return t;
}

// Per-step increments of one trajectory.
inline Table record_table(const TrajectoryRecord& rec) {
    Table t;
    t.header = {"t", "dW", "dY"};
    std::vector<double> ts(rec.dW.size());
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = static_cast<double>(i) * rec.step;
    t.columns = {ts, rec.dW, rec.dY};
    return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline json residuals_json(const Residuals& r) {
    return {{"trace_drift", r.trace_drift}, {"hermiticity", r.hermiticity}, {"min_eigenvalue", r.min_eigenvalue}, {"max_purity", r.max_purity}};
}

inline json ensemble_residuals_json(const EnsembleResult& r) {
    return {{"trace_error", r.max_trace_error},
            {"hermiticity", r.max_hermiticity},
            {"min_eigenvalue", r.min_eigenvalue},
            {"max_purity", r.max_purity},
            {"positivity_excursions", r.positivity_excursions}};
}

// Summary record: full parameter echo plus whatever the experiment adds.
inline json summary_json(const RunConfig& cfg, const json& extra, double wall_seconds) {
    json j = {{"config", to_json(cfg)}, {"wall_seconds", wall_seconds}, {"seed", cfg.seed}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

inline RunConfig config_from_summary(const json& summary) { return config_from_json(summary.at("config")); }

} // namespace wgqed
