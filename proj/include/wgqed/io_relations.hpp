#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "kernel.hpp"
#include "network.hpp"

namespace wgqed {

struct OutputRelation {
    Port port = Port::SemiInfiniteEnd;
    std::vector<DelayKernel> kernels;  // exact emission kernel per atom
    std::vector<cplx> weights;         // phase-folded weight per atom
};

inline Channel output_channel(Port port) {
    switch (port) {
        case Port::SemiInfiniteEnd: return Channel::SemiOutput;
        case Port::InfiniteLeft: return Channel::InfLeft;
        case Port::InfiniteRight: return Channel::InfRight;
    }
    return Channel::SemiOutput;
}

inline OutputRelation output_relation(const Network& net, Port port) {
    require_valid(net);
    if (!port_matches(net.kind, port)) throw std::invalid_argument("port " + to_string(port) + " incompatible with " + to_string(net.kind));
    OutputRelation out;
    out.port = port;
    for (std::size_t j = 0; j < net.size(); ++j) {
        out.kernels.push_back(channel_kernel(net, j, output_channel(port)));
        out.weights.push_back(out.kernels.back().folded());
    }
    return out;
}

struct EquivalenceResult {
    bool equivalent = false;
    std::vector<double> residuals;
    double max_residual() const { return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end()); }
};

inline constexpr double kEquivalenceTol = 1e-10;

// Compares the Markov-approximated emission of a multi-point atom with a reference atom.
inline EquivalenceResult equivalence_check(const Atom& multi, const Atom& single, WaveguideKind kind) {
    if (multi.points.empty() || single.points.empty()) throw std::invalid_argument("atoms need coupling points");
    EquivalenceResult r;
    if (kind == WaveguideKind::SemiInfinite) {
        auto sums = [](const Atom& a) {
            double s = 0.0, c = 0.0;
            for (const auto& p : a.points) {
                const double sl = std::sqrt(p.gammaL), sr = std::sqrt(p.gammaR);
                s += (sl + sr) * std::sin(p.phi);
                c += (sl - sr) * std::cos(p.phi);
            }
            return std::pair{s, c};
        };
        const auto [sm, cm] = sums(multi);
        const auto [ss, cs] = sums(single);
        r.residuals = {std::abs(ss - sm), std::abs(cs - cm)};
    } else {
        auto sums = [](const Atom& a) {
            cplx left = 0.0, right = 0.0;
            for (const auto& p : a.points) {
                left += std::sqrt(p.gammaL) * std::polar(1.0, p.phi);
                right += std::sqrt(p.gammaR) * std::polar(1.0, -p.phi);
            }
            return std::pair{left, right};
        };
        const auto [lm, rm] = sums(multi);
        const auto [ls, rs] = sums(single);
        r.residuals = {std::abs(ls - lm), std::abs(rs - rm)};
    }
    r.equivalent = r.max_residual() < kEquivalenceTol;
    return r;
}

} // namespace wgqed
