#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kernel.hpp"
#include "network.hpp"
#include "operators.hpp"

namespace wgqed {

enum class CoefficientMode { Activated, InstantOn };

inline std::string to_string(CoefficientMode m) { return m == CoefficientMode::Activated ? "activated" : "instant-on"; }

inline CoefficientMode mode_from_string(const std::string& s) {
    if (s == "activated") return CoefficientMode::Activated;
    if (s == "instant-on") return CoefficientMode::InstantOn;
    throw std::invalid_argument("unknown mode '" + s + "'");
}

inline void require_identical_frequencies(const Network& net) {
    for (const auto& a : net.atoms)
        if (std::abs(a.omega_a - net.atoms.front().omega_a) > 1e-12)
            throw std::domain_error("atoms must share one resonant frequency in the Markov approximation");
}

inline std::vector<Operator> lowering_operators(std::size_t n) {
    std::vector<Operator> out;
    for (std::size_t j = 1; j <= n; ++j) out.push_back(sigma(j, SigmaKind::Minus, n));
    return out;
}

// Coherent part of the complex coefficients: sum_jl (A_lj - conj A_jl)/(2i) L_l^dag L_j.
inline Operator exchange_hamiltonian(const Eigen::MatrixXcd& A, const std::vector<Operator>& L) {
    const std::size_t n = L.size();
    const Eigen::Index d = L.front().rows();
    Operator h = Operator::Zero(d, d);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < n; ++l) {
            const cplx c = (A(l, j) - std::conj(A(j, l))) / cplx(0.0, 2.0);
            if (c != 0.0) h += c * L[l].adjoint() * L[j];
        }
    return h;
}

// Drives in the frame rotating at omega_a; with exchange, the coherent coupling
// carried by the fully activated coefficients is added.
inline Operator build_hamiltonian(const Network& net, bool exchange = false) {
    require_valid(net);
    require_identical_frequencies(net);
    const std::size_t n = net.size();
    const auto L = lowering_operators(n);
    Operator h = Operator::Zero(L.front().rows(), L.front().cols());
    for (std::size_t j = 0; j < n; ++j)
        if (net.atoms[j].drive_amplitude != 0.0) h += net.atoms[j].drive_amplitude * (L[j] + L[j].adjoint());
    if (exchange) h += exchange_hamiltonian(coefficient_table(net).full(), L);
    return h;
}

// Everything the deterministic generator needs, prebuilt once.
struct MasterModel {
    std::size_t n = 0;
    Operator H;
    std::vector<Operator> L, Ld;
    std::vector<double> eta;
    CoefficientTable coeffs;

    explicit MasterModel(const Network& net)
        : n(net.size()), H(build_hamiltonian(net)), L(lowering_operators(net.size())), coeffs(coefficient_table(net)) {
        for (const auto& l : L) Ld.push_back(l.adjoint());
        for (const auto& a : net.atoms) eta.push_back(a.eta);
    }

    std::size_t dim() const { return static_cast<std::size_t>(H.rows()); }

    Eigen::MatrixXcd coefficients(double t, CoefficientMode mode) const {
        return mode == CoefficientMode::InstantOn ? coeffs.full() : coeffs.matrix(t);
    }

    // -i[H, rho] + sum_jl A_jl [L_l rho, L_j^dag] + conj(A_jl) [L_j, rho L_l^dag] + sum_j eta_j D[L_j] rho
    Operator rhs(const DensityMatrix& rho, const Eigen::MatrixXcd& A) const {
        const cplx mi(0.0, -1.0);
        Operator out = mi * (H * rho - rho * H);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t l = 0; l < n; ++l) {
                const cplx a = A(j, l);
                if (a == 0.0) continue;
                const Operator lr = L[l] * rho;
                const Operator rl = rho * Ld[l];
                out += a * (lr * Ld[j] - Ld[j] * lr) + std::conj(a) * (L[j] * rl - rl * L[j]);
            }
            if (eta[j] > 0) out += eta[j] * dissipator(L[j], rho);
        }
        return out;
    }

    // Same generator written as Hamiltonian exchange plus Hermitian dissipator matrix.
    Operator rhs_exchange(const DensityMatrix& rho, const Eigen::MatrixXcd& A) const {
        const cplx mi(0.0, -1.0);
        const Operator Ht = H + exchange_hamiltonian(A, L);
        Operator out = mi * (Ht * rho - rho * Ht);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t l = 0; l < n; ++l) {
                const cplx g = std::conj(A(j, l)) + A(l, j);
                if (g == 0.0) continue;
                const Operator lrl = L[j] * rho * Ld[l];
                const Operator ll = Ld[l] * L[j];
                out += g * (lrl - 0.5 * (ll * rho + rho * ll));
            }
            if (eta[j] > 0) out += eta[j] * dissipator(L[j], rho);
        }
        return out;
    }

    // Matrix of rho -> rhs(rho) acting on column-major vec(rho).
    Eigen::MatrixXcd liouvillian(const Eigen::MatrixXcd& A) const {
        const Eigen::Index d = H.rows();
        Eigen::MatrixXcd S(d * d, d * d);
        for (Eigen::Index c = 0; c < d; ++c)
            for (Eigen::Index r = 0; r < d; ++r) {
                DensityMatrix e = DensityMatrix::Zero(d, d);
                e(r, c) = 1.0;
                const Operator out = rhs(e, A);
                S.col(c * d + r) = Eigen::Map<const Eigen::VectorXcd>(out.data(), d * d);
            }
        return S;
    }
};

template <class State, class F>
State rk4_step(const State& y, double t, double h, F&& f) {
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * h, (y + 0.5 * h * k1).eval());
    const State k3 = f(t + 0.5 * h, (y + 0.5 * h * k2).eval());
    const State k4 = f(t + h, (y + h * k3).eval());
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline std::size_t step_count(double t_end, double dt) {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (!(t_end >= 0)) throw std::invalid_argument("t_end must be non-negative");
    const double k = t_end / dt;
    const auto n = static_cast<std::size_t>(std::llround(k));
    if (std::abs(k - static_cast<double>(n)) > 1e-9 * std::max(1.0, k)) throw std::invalid_argument("t_end must be a multiple of dt");
    return n;
}

struct Residuals {
    double trace_drift = 0.0;
    double hermiticity = 0.0;
    double min_eigenvalue = std::numeric_limits<double>::infinity();
    double max_purity = 0.0;

    void update(const DensityMatrix& rho) {
        trace_drift = std::max(trace_drift, std::abs(rho.trace() - cplx(1.0)));
        hermiticity = std::max(hermiticity, hermiticity_residual(rho));
        min_eigenvalue = std::min(min_eigenvalue, wgqed::min_eigenvalue(rho));
        max_purity = std::max(max_purity, wgqed::purity(rho));
    }
};

struct EvolutionResult {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    Residuals residuals;
    // First invariant violation, with step index.
    std::optional<std::string> violation;
};

struct MasterOptions {
    CoefficientMode mode = CoefficientMode::InstantOn;
    bool exchange = false;
    // Internal RK4 steps per output step.
    std::size_t substeps = 1;
};

inline EvolutionResult evolve_master(const Network& net, const DensityMatrix& rho0, double t_end, double dt,
                                     const MasterOptions& opt = {}) {
    const MasterModel model(net);
    if (rho0.rows() != static_cast<Eigen::Index>(model.dim()) || rho0.cols() != rho0.rows())
        throw std::invalid_argument("initial state has wrong dimension");
    const std::size_t K = step_count(t_end, dt);
    const std::size_t sub = std::max<std::size_t>(1, opt.substeps);
    const double h = dt / static_cast<double>(sub);

    const Eigen::MatrixXcd A_full = model.coeffs.full();
    auto f = [&](double t, const DensityMatrix& r) -> Operator {
        const Eigen::MatrixXcd A = opt.mode == CoefficientMode::InstantOn ? A_full : model.coeffs.matrix(t);
        return opt.exchange ? model.rhs_exchange(r, A) : model.rhs(r, A);
    };

    EvolutionResult res;
    res.times.reserve(K + 1);
    res.states.reserve(K + 1);
    DensityMatrix rho = rho0;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        res.times.push_back(t);
        res.states.push_back(rho);
        res.residuals.update(rho);
        if (!res.violation) {
            if (!rho.allFinite())
                res.violation = "non-finite state at step " + std::to_string(k);
            else if (std::abs(rho.trace() - cplx(1.0)) > 1e-6)
                res.violation = "trace drift at step " + std::to_string(k);
            else if (res.residuals.min_eigenvalue < -1e-6)
                res.violation = "negative eigenvalue at step " + std::to_string(k);
        }
        if (k == K) break;
        for (std::size_t s = 0; s < sub; ++s) rho = rk4_step(rho, t + static_cast<double>(s) * h, h, f);
    }
    return res;
}

// Per-atom parameters of the explicit three-atom equation.
struct ThreeAtomParams {
    std::array<double, 3> gammaL{}, gammaR{}, eta{}, phi{}, omega{};
};

inline ThreeAtomParams three_atom_params(const Network& net) {
    if (net.size() != 3) throw std::invalid_argument("three-atom parameters need N = 3");
    ThreeAtomParams p;
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& a = net.atoms[j];
        if (a.points.size() != 1) throw std::invalid_argument("three-atom form needs single-point atoms");
        p.gammaL[j] = a.points[0].gammaL;
        p.gammaR[j] = a.points[0].gammaR;
        p.phi[j] = a.points[0].phi;
        p.eta[j] = a.eta;
        p.omega[j] = a.drive_amplitude;
    }
    return p;
}

inline double three_atom_cross_rate(const ThreeAtomParams& p, std::size_t j, std::size_t l) {
    return (std::sqrt(p.gammaR[j] * p.gammaR[l]) + std::sqrt(p.gammaL[j] * p.gammaL[l])) * std::cos(p.phi[l] - p.phi[j]);
}

inline Operator three_atom_hamiltonian(const ThreeAtomParams& p) {
    const auto L = lowering_operators(3);
    Operator h = Operator::Zero(8, 8);
    for (std::size_t j = 0; j < 3; ++j) h += p.omega[j] * (L[j] + L[j].adjoint());
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t l = j + 1; l < 3; ++l) {
            const double dphi = p.phi[l] - p.phi[j];
            const cplx c = (std::sqrt(p.gammaR[j] * p.gammaR[l]) * std::polar(1.0, dphi) -
                            std::sqrt(p.gammaL[j] * p.gammaL[l]) * std::polar(1.0, -dphi)) /
                           cplx(0.0, 2.0);
            const Operator t = c * L[j] * L[l].adjoint();
            h += t + t.adjoint();
        }
    return h;
}

// Explicit three-atom generator with real cross rates and dissipators Gamma_j = gammaR + gammaL + eta.
inline Operator rhs_three_atom(const DensityMatrix& rho, const ThreeAtomParams& p) {
    if (rho.rows() != 8 || rho.cols() != 8) throw std::invalid_argument("three-atom state must be 8x8");
    const auto L = lowering_operators(3);
    const Operator h0 = three_atom_hamiltonian(p);
    const cplx mi(0.0, -1.0);
    Operator out = mi * (h0 * rho - rho * h0);
    for (std::size_t j = 0; j < 3; ++j) out += (p.gammaR[j] + p.gammaL[j] + p.eta[j]) * dissipator(L[j], rho);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t l = 0; l < 3; ++l) {
            if (j == l) continue;
            const Operator sp = L[l].adjoint();
            const Operator jl = L[j] * sp;
            out += three_atom_cross_rate(p, j, l) * (L[j] * rho * sp - 0.5 * jl * rho - 0.5 * rho * jl);
        }
    return out;
}

// Named expectation values tracked in reports.
struct Observable {
    std::string name;
    Operator op;
};

inline std::vector<Observable> default_observables(std::size_t n) {
    std::vector<Observable> obs;
    for (std::size_t j = 1; j <= n; ++j) obs.push_back({"sz" + std::to_string(j), sigma(j, SigmaKind::Z, n)});
    for (std::size_t j = 1; j <= n; ++j) {
        const Operator m = sigma(j, SigmaKind::Minus, n);
        obs.push_back({"exc" + std::to_string(j), m.adjoint() * m});
    }
    if (n == 2) {
        // |alpha|^2 and |beta|^2: populations of |eg> and |ge>.
        const std::size_t d = hilbert_dim(2);
        Operator pa = Operator::Zero(d, d), pb = Operator::Zero(d, d);
        pa(basis_index({true, false}), basis_index({true, false})) = 1.0;
        pb(basis_index({false, true}), basis_index({false, true})) = 1.0;
        obs.push_back({"alpha2", pa});
        obs.push_back({"beta2", pb});
    }
    return obs;
}

inline std::vector<std::vector<double>> expectations(const std::vector<DensityMatrix>& states, const std::vector<Observable>& obs) {
    std::vector<std::vector<double>> out(obs.size(), std::vector<double>(states.size()));
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t k = 0; k < states.size(); ++k) out[i][k] = expectation(obs[i].op, states[k]);
    return out;
}

} // namespace wgqed
