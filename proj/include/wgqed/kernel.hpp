#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "network.hpp"

namespace wgqed {

// Delays closer than this are the same delay.
inline constexpr double kDelayTol = 1e-12;
inline constexpr double kWeightTol = 1e-14;

// w * delta(x - delay). phase is the optical phase accumulated along that delay
// (omega_a * delay when positions are consistent); it only enters phase folding.
struct DeltaTerm {
    cplx weight;
    double delay = 0.0;
    double phase = 0.0;
};

// Which field mode a kernel acts on. Kernels on different modes commute.
enum class FieldMode { Any, Semi, RightMoving, LeftMoving };

inline bool same_phase(double a, double b) {
    return std::abs(std::remainder(a - b, 2 * std::numbers::pi)) < 1e-9;
}

class DelayKernel {
public:
    DelayKernel() = default;
    explicit DelayKernel(FieldMode mode) : mode_(mode) {}
    DelayKernel(std::vector<DeltaTerm> terms, FieldMode mode = FieldMode::Any) : terms_(std::move(terms)), mode_(mode) {
        normalize();
    }

    const std::vector<DeltaTerm>& terms() const& { return terms_; }
    std::vector<DeltaTerm> terms() && { return std::move(terms_); }
    FieldMode mode() const { return mode_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    void add(const DeltaTerm& t) {
        terms_.push_back(t);
        normalize();
    }

    DelayKernel& operator+=(const DelayKernel& o) {
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        if (mode_ == FieldMode::Any) mode_ = o.mode_;
        normalize();
        return *this;
    }

    // Total delta weight at a delay (all phases).
    cplx weight_at(double delay) const {
        cplx w = 0.0;
        for (const auto& t : terms_)
            if (std::abs(t.delay - delay) < kDelayTol) w += t.weight;
        return w;
    }

    bool has_delayed_term() const {
        return std::any_of(terms_.begin(), terms_.end(), [](const DeltaTerm& t) { return std::abs(t.delay) >= kDelayTol; });
    }

    // Markov-approximated value: sum of w * exp(i phase).
    cplx folded() const {
        cplx s = 0.0;
        for (const auto& t : terms_) s += t.weight * std::polar(1.0, t.phase);
        return s;
    }

private:
    void normalize() {
        std::sort(terms_.begin(), terms_.end(), [](const DeltaTerm& a, const DeltaTerm& b) {
            return a.delay != b.delay ? a.delay < b.delay : a.phase < b.phase;
        });
        std::vector<DeltaTerm> merged;
        for (const auto& t : terms_) {
            auto it = std::find_if(merged.begin(), merged.end(), [&](const DeltaTerm& m) {
                return std::abs(m.delay - t.delay) < kDelayTol && same_phase(m.phase, t.phase);
            });
            if (it == merged.end())
                merged.push_back(t);
            else
                it->weight += t.weight;
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(), [](const DeltaTerm& t) { return std::abs(t.weight) <= kWeightTol; }),
                     merged.end());
        terms_ = std::move(merged);
    }

    std::vector<DeltaTerm> terms_;
    FieldMode mode_ = FieldMode::Any;
};

enum class Channel {
    SemiTilde,      // input noise seen by an atom in front of the mirror
    SemiOutput,     // emission into the semi-infinite output field
    InfLeft,        // emission into the left-going output field
    InfRight,       // emission into the right-going output field
    InfInputRight,  // right-going input noise
    InfInputLeft,   // left-going input noise
};

inline std::string to_string(Channel c) {
    switch (c) {
        case Channel::SemiTilde: return "semi-tilde";
        case Channel::SemiOutput: return "semi-output";
        case Channel::InfLeft: return "inf-left";
        case Channel::InfRight: return "inf-right";
        case Channel::InfInputRight: return "inf-input-right";
        case Channel::InfInputLeft: return "inf-input-left";
    }
    return "?";
}

inline bool is_semi_channel(Channel c) { return c == Channel::SemiTilde || c == Channel::SemiOutput; }

// Kernel of one atom's coupling to a channel, summed over its coupling points.
// DeltaTerm (w, d) means w * delta((t - nu) - d).
inline DelayKernel channel_kernel(const Atom& atom, Channel ch) {
    std::vector<DeltaTerm> terms;
    FieldMode mode = FieldMode::Semi;
    for (const auto& p : atom.points) {
        const double sL = std::sqrt(p.gammaL), sR = std::sqrt(p.gammaR);
        switch (ch) {
            case Channel::SemiTilde:
                terms.push_back({sR, p.tau, p.phi});
                terms.push_back({-sL, -p.tau, -p.phi});
                break;
            case Channel::SemiOutput:
                terms.push_back({sL, p.tau, p.phi});
                terms.push_back({-sR, -p.tau, -p.phi});
                break;
            case Channel::InfLeft:
                mode = FieldMode::LeftMoving;
                terms.push_back({sL, p.tau, p.phi});
                break;
            case Channel::InfRight:
                mode = FieldMode::RightMoving;
                terms.push_back({sR, -p.tau, -p.phi});
                break;
            case Channel::InfInputRight:
                mode = FieldMode::RightMoving;
                terms.push_back({sR, p.tau, p.phi});
                break;
            case Channel::InfInputLeft:
                mode = FieldMode::LeftMoving;
                terms.push_back({sL, -p.tau, -p.phi});
                break;
        }
    }
    return DelayKernel(std::move(terms), mode);
}

inline DelayKernel channel_kernel(const Network& net, std::size_t j, Channel ch) {
    require_valid(net);
    if (j >= net.size()) throw std::out_of_range("atom index out of range");
    if (is_semi_channel(ch) != (net.kind == WaveguideKind::SemiInfinite))
        throw std::invalid_argument("channel " + to_string(ch) + " incompatible with " + to_string(net.kind) + " waveguide");
    return channel_kernel(net.atoms[j], ch);
}

// [b_a(t), b_b(t')^dag] as a kernel in t - t': term (conj(w_a) w_b, d_a - d_b).
inline DelayKernel commutator_kernel(const DelayKernel& a, const DelayKernel& b) {
    if (a.mode() != FieldMode::Any && b.mode() != FieldMode::Any && a.mode() != b.mode()) return DelayKernel(a.mode());
    std::vector<DeltaTerm> out;
    out.reserve(a.size() * b.size());
    for (const auto& ta : a.terms())
        for (const auto& tb : b.terms()) out.push_back({std::conj(ta.weight) * tb.weight, ta.delay - tb.delay, ta.phase - tb.phase});
    return DelayKernel(std::move(out), a.mode() == FieldMode::Any ? b.mode() : a.mode());
}

// Input-noise commutator kernel between atoms j and l, summed over independent field modes.
inline DelayKernel pair_kernel(const Network& net, std::size_t j, std::size_t l) {
    if (net.kind == WaveguideKind::SemiInfinite)
        return commutator_kernel(channel_kernel(net.atoms[j], Channel::SemiTilde), channel_kernel(net.atoms[l], Channel::SemiTilde));
    DelayKernel k = commutator_kernel(channel_kernel(net.atoms[j], Channel::InfInputRight),
                                      channel_kernel(net.atoms[l], Channel::InfInputRight));
    k += commutator_kernel(channel_kernel(net.atoms[j], Channel::InfInputLeft), channel_kernel(net.atoms[l], Channel::InfInputLeft));
    return k;
}

struct MarkovVerdict {
    bool markovian = true;
    // Offending pair (0-based) and delayed term when non-Markovian.
    std::size_t j = 0, l = 0;
    std::optional<DeltaTerm> witness;
    std::string reason;
};

inline MarkovVerdict is_markovian(const Network& net) {
    require_valid(net);
    MarkovVerdict v;
    for (std::size_t j = 0; j < net.size(); ++j)
        for (std::size_t l = 0; l < net.size(); ++l) {
            // Witness: the first positive-delay term (the one that switches on in the dynamics), else any delayed term.
            const DelayKernel k = pair_kernel(net, j, l);
            const DeltaTerm* w = nullptr;
            for (const auto& t : k.terms()) {
                if (std::abs(t.delay) < kDelayTol) continue;
                if (!w || (w->delay < 0 && t.delay > 0)) w = &t;
            }
            if (!w) continue;
            v.markovian = false;
            v.j = j;
            v.l = l;
            v.witness = *w;
            v.reason = "commutator of atoms " + std::to_string(j + 1) + "," + std::to_string(l + 1) + " has a delayed term";
            return v;
        }
    v.reason = net.kind == WaveguideKind::SemiInfinite
                   ? "no delayed term: gammaL_j gammaR_l = 0 for all j,l and same-direction partners co-located"
                   : "no delayed term: co-propagating couplings never pair distinct positions";
    return v;
}

// Coefficients of dt in dB_j dB_l^dag. dB dB, dB^dag dB^dag and dB^dag dB vanish.
struct ItoTable {
    std::size_t n = 0;
    Eigen::MatrixXcd entries;
    double dt = 0.0;

    static constexpr double dB_dB = 0.0;
    static constexpr double dBdag_dBdag = 0.0;
    static constexpr double dBdag_dB = 0.0;
};

// Smallest coupling delay in the network.
inline double min_delay(const Network& net) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& a : net.atoms)
        for (const auto& p : a.points) m = std::min(m, p.tau);
    return m;
}

inline ItoTable ito_table(const Network& net, double dt) {
    require_valid(net);
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (net.kind == WaveguideKind::SemiInfinite && !(dt < min_delay(net)))
        throw std::domain_error("semi-infinite Ito table needs dt below the smallest atom-mirror delay");
    ItoTable t{net.size(), Eigen::MatrixXcd::Zero(net.size(), net.size()), dt};
    for (std::size_t j = 0; j < net.size(); ++j)
        for (std::size_t l = 0; l < net.size(); ++l)
            for (const auto& term : pair_kernel(net, j, l).terms())
                if (std::abs(term.delay) <= dt + kDelayTol) t.entries(j, l) += term.weight;
    return t;
}

// Integrated kernels of the master equation: value(j,l,t) = sum of amplitudes with activation <= t.
struct CoefficientTable {
    struct Entry {
        cplx amplitude;
        double activation = 0.0;
    };
    std::size_t n = 0;
    std::vector<std::vector<Entry>> entries;  // row-major n*n

    CoefficientTable() = default;
    explicit CoefficientTable(std::size_t n_) : n(n_), entries(n_ * n_) {}

    std::vector<Entry>& at(std::size_t j, std::size_t l) { return entries[j * n + l]; }
    const std::vector<Entry>& at(std::size_t j, std::size_t l) const { return entries[j * n + l]; }

    cplx value(std::size_t j, std::size_t l, double t) const {
        cplx s = 0.0;
        for (const auto& e : at(j, l))
            if (e.activation <= t) s += e.amplitude;
        return s;
    }

    Eigen::MatrixXcd matrix(double t) const {
        Eigen::MatrixXcd m(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < n; ++l) m(j, l) = value(j, l, t);
        return m;
    }

    Eigen::MatrixXcd full() const { return matrix(std::numeric_limits<double>::infinity()); }

    // Sorted distinct activation times.
    std::vector<double> activations() const {
        std::vector<double> a;
        for (const auto& v : entries)
            for (const auto& e : v) a.push_back(e.activation);
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        return a;
    }
};

// Delay-0 terms enter with half weight, positive delays fully after activation,
// negative delays never (they fall outside the integration range).
inline CoefficientTable coefficient_table(const Network& net, std::optional<double> omega_a = std::nullopt) {
    require_valid(net);
    CoefficientTable tab(net.size());
    for (std::size_t j = 0; j < net.size(); ++j)
        for (std::size_t l = 0; l < net.size(); ++l)
            for (const auto& t : pair_kernel(net, j, l).terms()) {
                if (std::abs(t.delay) < kDelayTol) {
                    tab.at(j, l).push_back({0.5 * t.weight, 0.0});
                } else if (t.delay > 0) {
                    const double ph = omega_a ? *omega_a * t.delay : t.phase;
                    tab.at(j, l).push_back({t.weight * std::polar(1.0, ph), t.delay});
                }
            }
    return tab;
}

inline Eigen::MatrixXcd gauge_coefficients(const Network& net, double t, std::optional<double> omega_a = std::nullopt) {
    return coefficient_table(net, omega_a).matrix(t);
}

} // namespace wgqed
