#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dynamics.hpp"
#include "network.hpp"
#include "operators.hpp"

namespace wgqed {

enum class FilterScheme {
    // Instrument whose outcome-averaged channel is exp(h L); positive and mean-exact.
    Instrument,
    // Explicit Euler-Maruyama step of the stochastic master equation.
    Euler,
};

inline std::string to_string(FilterScheme s) { return s == FilterScheme::Instrument ? "instrument" : "euler"; }

inline FilterScheme scheme_from_string(const std::string& s) {
    if (s == "instrument") return FilterScheme::Instrument;
    if (s == "euler") return FilterScheme::Euler;
    throw std::invalid_argument("unknown filter scheme '" + s + "'");
}

struct PositivityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kPositivityFloor = -1e-3;

inline Operator collapse_operator(const Network& net, Port port) {
    const auto L = lowering_operators(net.size());
    Operator lb = Operator::Zero(L.front().rows(), L.front().cols());
    for (const auto& [j, w] : coupling_operator_weights(net, port)) lb += w * L[j];
    return lb;
}

inline Operator collapse_operator(const Network& net) { return collapse_operator(net, net.port); }

// Euler-Maruyama step: rho + rhs*dt + H[Lbar]rho*dW, then Hermitize and renormalize.
inline DensityMatrix filter_step(const MasterModel& model, const Eigen::MatrixXcd& A, const DensityMatrix& rho, const Operator& lbar,
                                 double dW, double dt, bool strict = false, double* min_eig = nullptr) {
    DensityMatrix out = rho + dt * model.rhs(rho, A) + dW * measurement_superop(lbar, rho);
    hermitize(out);
    out /= out.trace();
    const double m = min_eigenvalue(out);
    if (min_eig) *min_eig = m;
    if (strict && m < kPositivityFloor) throw PositivityError("filter step produced eigenvalue " + std::to_string(m));
    return out;
}

// Gaussian CDF and density.
inline double norm_cdf(double s) { return 0.5 * std::erfc(-s / std::numbers::sqrt2); }
inline double norm_pdf(double s) { return std::exp(-0.5 * s * s) / std::sqrt(2 * std::numbers::pi); }

// Smallest s in [lo, hi] with F(s) >= u, for nondecreasing F.
template <class F>
double invert_cdf(F&& cdf, double u, double lo = -40.0, double hi = 40.0) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double norm_quantile(double u) { return invert_cdf(norm_cdf, u); }

// One substep of homodyne conditioning built from an exact Kraus decomposition of exp(h L).
// The measured outcome s (y = sqrt(h) s) carries amplitudes B0 + s B1 + (s^2-1)/sqrt2 B2;
// all remaining Kraus operators are unobserved and summed.
class Instrument {
public:
    Instrument(const MasterModel& model, const Eigen::MatrixXcd& A, const Operator& lbar, double h) : h_(h) {
        const Eigen::Index d = model.H.rows(), d2 = d * d;
        d_ = d;
        const Eigen::MatrixXcd S = (h * model.liouvillian(A)).exp();

        // Choi matrix J[(m,i),(n,j)] = E(|m><n|)_{ij}, rows indexed like column-major vec of a Kraus operator.
        Eigen::MatrixXcd J(d2, d2);
        for (Eigen::Index n = 0; n < d; ++n)
            for (Eigen::Index m = 0; m < d; ++m) {
                const Eigen::VectorXcd col = S.col(n * d + m);
                for (Eigen::Index j = 0; j < d; ++j)
                    for (Eigen::Index i = 0; i < d; ++i) J(m * d + i, n * d + j) = col(j * d + i);
            }
        J = 0.5 * (J + J.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(J);
        Eigen::VectorXd lam = es.eigenvalues();
        clipped_weight_ = 0.0;
        for (Eigen::Index k = 0; k < d2; ++k)
            if (lam(k) < 0) {
                clipped_weight_ -= lam(k);
                lam(k) = 0.0;
            }
        const Eigen::MatrixXcd Akraus = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

        // Reference Kraus set of the first-order conditioned update.
        const std::size_t n = model.n;
        Eigen::VectorXcd lw(n);
        for (std::size_t j = 0; j < n; ++j) lw(j) = (model.Ld[j] * lbar).trace() / (model.Ld[j] * model.L[j]).trace();
        Eigen::MatrixXcd G(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < n; ++l) G(j, l) = std::conj(A(j, l)) + A(l, j);
        const Eigen::MatrixXcd Grest = G - lw * lw.adjoint();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> gs(0.5 * (Grest + Grest.adjoint()));
        std::vector<Operator> jumps;
        for (Eigen::Index k = 0; k < gs.eigenvalues().size(); ++k) {
            if (gs.eigenvalues()(k) <= 1e-14) continue;
            Operator jk = Operator::Zero(d, d);
            for (std::size_t j = 0; j < n; ++j) jk += gs.eigenvectors()(j, k) * model.L[j];
            jumps.push_back(std::sqrt(gs.eigenvalues()(k)) * jk);
        }
        for (std::size_t j = 0; j < n; ++j)
            if (model.eta[j] > 0) jumps.push_back(std::sqrt(model.eta[j]) * model.L[j]);

        const Operator Ht = model.H + exchange_hamiltonian(A, model.L);
        Operator K = cplx(0.0, 1.0) * Ht + 0.5 * lbar.adjoint() * lbar;
        for (const auto& jk : jumps) K += 0.5 * jk.adjoint() * jk;

        measured_ = lbar.cwiseAbs().maxCoeff() > 0.0;
        n_cont_ = measured_ ? 3 : 1;
        std::vector<Operator> targets{Operator::Identity(d, d) - h * K};
        if (measured_) {
            targets.push_back(std::sqrt(h) * lbar);
            targets.push_back((h / std::numbers::sqrt2) * lbar * lbar);
        }
        for (const auto& jk : jumps) targets.push_back(std::sqrt(h) * jk);

        Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(d2, std::max<Eigen::Index>(d2, static_cast<Eigen::Index>(targets.size())));
        for (std::size_t k = 0; k < targets.size(); ++k) T.col(k) = Eigen::Map<const Eigen::VectorXcd>(targets[k].data(), d2);
        Eigen::MatrixXcd Apad = Eigen::MatrixXcd::Zero(d2, T.cols());
        Apad.leftCols(d2) = Akraus;

        // Unitary mixing of the exact Kraus set closest to the reference set.
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Apad.adjoint() * T, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::MatrixXcd B = Apad * (svd.matrixU() * svd.matrixV().adjoint());

        for (Eigen::Index k = 0; k < B.cols(); ++k) {
            Operator bk = Eigen::Map<const Operator>(B.col(k).data(), d, d);
            if (k < n_cont_) {
                fit_error_ = std::max(fit_error_, (bk - targets[k]).cwiseAbs().maxCoeff());
                cont_.push_back(std::move(bk));
            } else if (bk.cwiseAbs().maxCoeff() > 0.0) {
                rest_.push_back(std::move(bk));
            }
        }
        for (int k = 0; k < n_cont_; ++k)
            for (int l = 0; l < n_cont_; ++l) gram_.push_back(cont_[l].adjoint() * cont_[k]);
        rest_super_ = Eigen::MatrixXcd::Zero(d2, d2);
        for (const auto& b : rest_) rest_super_ += kron(b.conjugate(), b);
        rest_effect_ = Operator::Zero(d, d);
        for (const auto& b : rest_) rest_effect_ += b.adjoint() * b;
    }

    struct Outcome {
        DensityMatrix rho;
        double y = 0.0;  // record increment over the substep
    };

    // u in (0,1) selects the outcome by inverse transform of its Born density.
    Outcome apply(const DensityMatrix& rho, double u) const {
        // Hermite amplitudes c0 = 1, c1 = s, c2 = (s^2 - 1)/sqrt2 as polynomials in s.
        static const double c[3][3] = {{1, 0, 0}, {0, 1, 0}, {-1 / std::numbers::sqrt2, 0, 1 / std::numbers::sqrt2}};
        double q[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < n_cont_; ++k)
            for (int l = 0; l < n_cont_; ++l) {
                const double ckl = trace_product(gram_[k * n_cont_ + l], rho).real();
                if (ckl == 0.0) continue;
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) q[a + b] += ckl * c[k][a] * c[l][b];
            }
        const double p_rest = trace_product(rest_effect_, rho).real();

        // CDF of pdf(s) * (q(s) + p_rest) via moments I_n(s) = int_{-inf}^s t^n pdf(t) dt.
        auto cdf = [&](double s) {
            const double ph = norm_pdf(s);
            double I[5];
            I[0] = norm_cdf(s);
            I[1] = -ph;
            double sp = 1.0;
            for (int n = 2; n < 5; ++n) {
                sp *= s;
                I[n] = -sp * ph + (n - 1) * I[n - 2];
            }
            return q[0] * I[0] + q[1] * I[1] + q[2] * I[2] + q[3] * I[3] + q[4] * I[4] + p_rest * I[0];
        };
        const double total = q[0] + q[2] + 3 * q[4] + p_rest;
        const double s = invert_cdf(cdf, u * total);

        const double amp[3] = {1.0, s, (s * s - 1.0) / std::numbers::sqrt2};
        Operator Ka = amp[0] * cont_[0];
        for (int k = 1; k < n_cont_; ++k) Ka += amp[k] * cont_[k];
        DensityMatrix out = Ka * rho * Ka.adjoint();
        if (!rest_.empty()) {
            Eigen::VectorXcd v = rest_super_ * Eigen::Map<const Eigen::VectorXcd>(rho.data(), rho.size());
            out += Eigen::Map<const Operator>(v.data(), d_, d_);
        }
        hermitize(out);
        out /= out.trace().real();
        return {std::move(out), std::sqrt(h_) * s};
    }

    double h() const { return h_; }
    double fit_error() const { return fit_error_; }
    double clipped_weight() const { return clipped_weight_; }
    std::size_t unobserved_count() const { return rest_.size(); }

private:
    double h_;
    Eigen::Index d_ = 0;
    bool measured_ = false;
    int n_cont_ = 1;
    double fit_error_ = 0.0;
    double clipped_weight_ = 0.0;
    std::vector<Operator> cont_, rest_, gram_;
    Eigen::MatrixXcd rest_super_;
    Operator rest_effect_;
};

struct FilterOptions {
    FilterScheme scheme = FilterScheme::Instrument;
    CoefficientMode mode = CoefficientMode::InstantOn;
    std::size_t substeps = 10;
    bool strict_positivity = false;
    bool keep_increments = true;
};

// Precomputed, read-only data shared by all trajectories of one run.
class FilterPlan {
public:
    FilterPlan(const Network& net, double t_end, double dt, const FilterOptions& opt)
        : model_(net), lbar_(collapse_operator(net)), opt_(opt), dt_(dt), steps_(step_count(t_end, dt)) {
        if (opt_.substeps == 0) throw std::invalid_argument("substeps must be positive");
        h_ = dt / static_cast<double>(opt_.substeps);
        activations_ = model_.coeffs.activations();
        x_ = lbar_ + lbar_.adjoint();
        if (opt_.scheme == FilterScheme::Instrument) {
            // Coefficients are piecewise constant; one instrument per segment that a substep midpoint hits.
            segment_.resize(steps_ * opt_.substeps);
            std::vector<std::size_t> seg_of_count(activations_.size() + 1, SIZE_MAX);
            for (std::size_t i = 0; i < segment_.size(); ++i) {
                const double tm = (static_cast<double>(i) + 0.5) * h_;
                const std::size_t c = opt_.mode == CoefficientMode::InstantOn ? activations_.size() : active_count(tm);
                if (seg_of_count[c] == SIZE_MAX) {
                    seg_of_count[c] = instruments_.size();
                    instruments_.emplace_back(model_, coefficients_at(tm), lbar_, h_);
                }
                segment_[i] = seg_of_count[c];
            }
        }
    }

    const MasterModel& model() const { return model_; }
    const Operator& lbar() const { return lbar_; }
    const Operator& quadrature() const { return x_; }
    const FilterOptions& options() const { return opt_; }
    double dt() const { return dt_; }
    double h() const { return h_; }
    std::size_t steps() const { return steps_; }
    const std::vector<Instrument>& instruments() const { return instruments_; }
    const Instrument& instrument_for(std::size_t substep) const { return instruments_[segment_[substep]]; }

    Eigen::MatrixXcd coefficients_at(double t) const { return model_.coefficients(t, opt_.mode); }

private:
    std::size_t active_count(double t) const {
        return static_cast<std::size_t>(std::upper_bound(activations_.begin(), activations_.end(), t) - activations_.begin());
    }

    MasterModel model_;
    Operator lbar_, x_;
    FilterOptions opt_;
    double dt_, h_ = 0.0;
    std::size_t steps_;
    std::vector<double> activations_;
    std::vector<Instrument> instruments_;
    std::vector<std::size_t> segment_;
};

// Independent stream for trajectory k; draws are consumed in step order.
inline std::mt19937_64 trajectory_rng(std::uint64_t base_seed, std::uint64_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    return std::mt19937_64(seq);
}

// Uniform in the open interval (0, 1) with 53 random bits.
inline double open_uniform(std::mt19937_64& g) { return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53; }

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    std::vector<double> times;
    double step = 0.0;                      // integration step of the increments
    std::vector<double> dW, dY;             // one entry per integration step
    std::vector<std::vector<double>> expect;  // [observable][grid point]
    double min_eigenvalue = std::numeric_limits<double>::infinity();
    double max_purity = 0.0;
    double max_trace_error = 0.0;
    double max_hermiticity = 0.0;
    std::size_t positivity_excursions = 0;
};

inline TrajectoryRecord run_trajectory(const FilterPlan& plan, const DensityMatrix& rho0, const std::vector<Observable>& obs,
                                       std::uint64_t base_seed, std::uint64_t index = 0) {
    const auto& opt = plan.options();
    const std::size_t K = plan.steps(), sub = opt.substeps;
    const double h = plan.h();
    auto rng = trajectory_rng(base_seed, index);

    TrajectoryRecord rec;
    rec.seed = base_seed;
    rec.index = index;
    rec.step = h;
    rec.expect.assign(obs.size(), std::vector<double>(K + 1));
    if (opt.keep_increments) {
        rec.dW.reserve(K * sub);
        rec.dY.reserve(K * sub);
    }
    DensityMatrix rho = rho0;
    auto record = [&](std::size_t k) {
        rec.times.push_back(static_cast<double>(k) * plan.dt());
        for (std::size_t i = 0; i < obs.size(); ++i) rec.expect[i][k] = expectation(obs[i].op, rho);
        const double m = min_eigenvalue(rho);
        rec.min_eigenvalue = std::min(rec.min_eigenvalue, m);
        if (m < kPositivityFloor) ++rec.positivity_excursions;
        rec.max_purity = std::max(rec.max_purity, purity(rho));
        rec.max_trace_error = std::max(rec.max_trace_error, std::abs(rho.trace() - cplx(1.0)));
        rec.max_hermiticity = std::max(rec.max_hermiticity, hermiticity_residual(rho));
    };

    record(0);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t s = 0; s < sub; ++s) {
            const std::size_t i = k * sub + s;
            const double t = static_cast<double>(i) * h;
            const double signal = expectation(plan.quadrature(), rho) * h;
            const double u = open_uniform(rng);
            double dW;
            if (opt.scheme == FilterScheme::Instrument) {
                auto o = plan.instrument_for(i).apply(rho, u);
                rho = std::move(o.rho);
                dW = o.y - signal;
            } else {
                dW = std::sqrt(h) * norm_quantile(u);
                rho = filter_step(plan.model(), plan.coefficients_at(t), rho, plan.lbar(), dW, h, opt.strict_positivity);
            }
            if (opt.keep_increments) {
                rec.dW.push_back(dW);
                rec.dY.push_back(signal + dW);
            }
        }
        if (!rho.allFinite()) throw std::runtime_error("non-finite filter state at step " + std::to_string(k + 1));
        record(k + 1);
        if (opt.strict_positivity && rec.min_eigenvalue < kPositivityFloor)
            throw PositivityError("negative eigenvalue " + std::to_string(rec.min_eigenvalue) + " at step " + std::to_string(k + 1));
    }
    return rec;
}

inline TrajectoryRecord run_trajectory(const Network& net, const DensityMatrix& rho0, double t_end, double dt, std::uint64_t seed,
                                       const FilterOptions& opt = {}) {
    const FilterPlan plan(net, t_end, dt, opt);
    return run_trajectory(plan, rho0, default_observables(net.size()), seed, 0);
}

struct EnsembleResult {
    std::size_t M = 0;
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<double>> mean, se;  // [observable][grid point]
    std::vector<TrajectoryRecord> records;            // kept only on request
    double min_eigenvalue = std::numeric_limits<double>::infinity();
    double max_purity = 0.0;
    double max_trace_error = 0.0;
    double max_hermiticity = 0.0;
    std::size_t positivity_excursions = 0;
};

inline EnsembleResult run_ensemble(const FilterPlan& plan, const DensityMatrix& rho0, const std::vector<Observable>& obs, std::size_t M,
                                   std::uint64_t base_seed, std::size_t workers = 1, bool keep_records = false) {
    if (M == 0) throw std::invalid_argument("ensemble needs at least one trajectory");
    workers = std::max<std::size_t>(1, std::min(workers, M));
    std::vector<TrajectoryRecord> recs(M);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < M;) {
            try {
                recs[k] = run_trajectory(plan, rho0, obs, base_seed, k);
                if (!keep_records) {
                    recs[k].dW.clear();
                    recs[k].dY.clear();
                    recs[k].dW.shrink_to_fit();
                    recs[k].dY.shrink_to_fit();
                }
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = M;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Fixed index-order reduction so results do not depend on scheduling.
    EnsembleResult res;
    res.M = M;
    res.times = recs.front().times;
    for (const auto& o : obs) res.names.push_back(o.name);
    const std::size_t P = res.times.size();
    res.mean.assign(obs.size(), std::vector<double>(P, 0.0));
    res.se.assign(obs.size(), std::vector<double>(P, 0.0));
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t p = 0; p < P; ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < M; ++k) s += recs[k].expect[i][p];
            const double mean = s / static_cast<double>(M);
            double ss = 0.0;
            for (std::size_t k = 0; k < M; ++k) {
                const double dv = recs[k].expect[i][p] - mean;
                ss += dv * dv;
            }
            res.mean[i][p] = mean;
            res.se[i][p] = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
        }
    for (const auto& r : recs) {
        res.min_eigenvalue = std::min(res.min_eigenvalue, r.min_eigenvalue);
        res.max_purity = std::max(res.max_purity, r.max_purity);
        res.max_trace_error = std::max(res.max_trace_error, r.max_trace_error);
        res.max_hermiticity = std::max(res.max_hermiticity, r.max_hermiticity);
        res.positivity_excursions += r.positivity_excursions;
    }
    if (keep_records) res.records = std::move(recs);
    return res;
}

inline EnsembleResult run_ensemble(const Network& net, const DensityMatrix& rho0, double t_end, double dt, std::size_t M,
                                   std::uint64_t base_seed, std::size_t workers = 1, const FilterOptions& opt = {}) {
    const FilterPlan plan(net, t_end, dt, opt);
    return run_ensemble(plan, rho0, default_observables(net.size()), M, base_seed, workers);
}

} // namespace wgqed
