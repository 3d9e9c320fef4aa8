#pragma once

#include <ostream>

#include <wgqed/config.hpp>

namespace wgqed::cli {

struct Extras {
    bool records = false;  // filter: also write per-trajectory series
};

// Each command prints a human-readable report to `out` and writes machine-readable
// files under cfg.out_dir. Returns a process exit code.
int classify(const RunConfig& cfg, std::ostream& out);
int kernels(const RunConfig& cfg, std::ostream& out);
int simulate(const RunConfig& cfg, std::ostream& out);
int filter(const RunConfig& cfg, std::ostream& out, const Extras& extras = {});
int equivalence(const RunConfig& cfg, std::ostream& out);

int run(const RunConfig& cfg, std::ostream& out, const Extras& extras = {});

} // namespace wgqed::cli
