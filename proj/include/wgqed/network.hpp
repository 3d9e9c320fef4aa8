#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wgqed {

using cplx = std::complex<double>;

enum class WaveguideKind { SemiInfinite, Infinite };
enum class Port { SemiInfiniteEnd, InfiniteLeft, InfiniteRight };

// One place where an atom touches the waveguide. tau = z/c in us, phi = omega_a z/c in rad.
struct CouplingPoint {
    double tau = 0.0;
    double phi = 0.0;
    double gammaL = 0.0;
    double gammaR = 0.0;

    bool operator==(const CouplingPoint&) const = default;
};

struct Atom {
    double omega_a = 0.0;
    double eta = 0.0;
    double drive_amplitude = 0.0;
    std::vector<CouplingPoint> points;

    // Position used for ordering atoms along the guide.
    double first_tau() const { return points.empty() ? 0.0 : points.front().tau; }

    bool operator==(const Atom&) const = default;
};

struct Network {
    WaveguideKind kind = WaveguideKind::SemiInfinite;
    std::vector<Atom> atoms;
    Port port = Port::SemiInfiniteEnd;

    // Global frequency for the phi = omega_a * tau consistency check; off when empty.
    std::optional<double> omega_a;
    double phase_tolerance = 1e-9;

    std::size_t size() const { return atoms.size(); }

    bool operator==(const Network&) const = default;
};

inline std::string to_string(WaveguideKind k) {
    return k == WaveguideKind::SemiInfinite ? "semi-infinite" : "infinite";
}

inline std::string to_string(Port p) {
    switch (p) {
        case Port::SemiInfiniteEnd: return "semi-infinite-end";
        case Port::InfiniteLeft: return "infinite-left";
        case Port::InfiniteRight: return "infinite-right";
    }
    return "?";
}

inline WaveguideKind kind_from_string(const std::string& s) {
    if (s == "semi-infinite") return WaveguideKind::SemiInfinite;
    if (s == "infinite") return WaveguideKind::Infinite;
    throw std::invalid_argument("unknown waveguide kind '" + s + "'");
}

inline Port port_from_string(const std::string& s) {
    if (s == "semi-infinite-end") return Port::SemiInfiniteEnd;
    if (s == "infinite-left") return Port::InfiniteLeft;
    if (s == "infinite-right") return Port::InfiniteRight;
    throw std::invalid_argument("unknown port '" + s + "'");
}

inline bool port_matches(WaveguideKind k, Port p) {
    return (p == Port::SemiInfiniteEnd) == (k == WaveguideKind::SemiInfinite);
}

// Every invariant violation, in atom order. Atoms and points are reported 1-based.
inline std::vector<std::string> validate(const Network& net) {
    std::vector<std::string> out;
    auto where = [](std::size_t j, std::size_t n) {
        return "atom " + std::to_string(j + 1) + " point " + std::to_string(n + 1);
    };
    if (net.atoms.empty()) out.push_back("network has no atoms");
    if (!port_matches(net.kind, net.port))
        out.push_back("port " + to_string(net.port) + " does not match topology " + to_string(net.kind));

    for (std::size_t j = 0; j < net.atoms.size(); ++j) {
        const Atom& a = net.atoms[j];
        const std::string aj = "atom " + std::to_string(j + 1);
        if (!(a.eta >= 0)) out.push_back(aj + ": eta must be non-negative");
        if (!std::isfinite(a.drive_amplitude)) out.push_back(aj + ": drive amplitude is not finite");
        if (a.points.empty()) {
            out.push_back(aj + ": no coupling points");
            continue;
        }
        for (std::size_t n = 0; n < a.points.size(); ++n) {
            const CouplingPoint& p = a.points[n];
            if (!(p.tau >= 0)) out.push_back(where(j, n) + ": tau must be non-negative");
            if (!(p.gammaL >= 0)) out.push_back(where(j, n) + ": gammaL must be non-negative");
            if (!(p.gammaR >= 0)) out.push_back(where(j, n) + ": gammaR must be non-negative");
            if (!std::isfinite(p.phi)) out.push_back(where(j, n) + ": phi is not finite");
            if (n > 0 && !(p.tau > a.points[n - 1].tau))
                out.push_back(where(j, n) + ": delays must be strictly increasing within an atom");
            if (net.omega_a && std::abs(p.phi - *net.omega_a * p.tau) >= net.phase_tolerance)
                out.push_back(where(j, n) + ": phi differs from omega_a*tau");
        }
        if (j > 0 && !net.atoms[j - 1].points.empty() && a.first_tau() < net.atoms[j - 1].first_tau())
            out.push_back(aj + ": atoms must be ordered by position along the waveguide");
    }
    return out;
}

inline void require_valid(const Network& net) {
    auto v = validate(net);
    if (v.empty()) return;
    std::string msg = "invalid network:";
    for (auto& s : v) msg += "\n  " + s;
    throw std::invalid_argument(msg);
}

// Weight of one coupling point in the measured collapse operator.
inline cplx point_weight(const CouplingPoint& p, Port port) {
    const cplx ep = std::polar(1.0, p.phi);
    switch (port) {
        case Port::SemiInfiniteEnd: return std::sqrt(p.gammaL) * ep - std::sqrt(p.gammaR) * std::conj(ep);
        case Port::InfiniteLeft: return std::sqrt(p.gammaL) * ep;
        case Port::InfiniteRight: return std::sqrt(p.gammaR) * std::conj(ep);
    }
    return 0.0;
}

// l_j such that Lbar = sum_j l_j sigma_j^-.
inline std::vector<std::pair<std::size_t, cplx>> coupling_operator_weights(const Network& net, Port port) {
    require_valid(net);
    if (!port_matches(net.kind, port))
        throw std::invalid_argument("port " + to_string(port) + " incompatible with " + to_string(net.kind));
    std::vector<std::pair<std::size_t, cplx>> out;
    for (std::size_t j = 0; j < net.atoms.size(); ++j) {
        cplx w = 0.0;
        for (const auto& p : net.atoms[j].points) w += point_weight(p, port);
        out.emplace_back(j, w);
    }
    return out;
}

inline std::vector<std::pair<std::size_t, cplx>> coupling_operator_weights(const Network& net) {
    return coupling_operator_weights(net, net.port);
}

} // namespace wgqed
