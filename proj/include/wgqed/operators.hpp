#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wgqed {

using Operator = Eigen::MatrixXcd;
using DensityMatrix = Eigen::MatrixXcd;

enum class SigmaKind { Minus, Plus, Z };

// Per-atom basis (|e>, |g>); atom 1 is the leftmost tensor factor.
inline Operator single_sigma(SigmaKind k) {
    Operator s = Operator::Zero(2, 2);
    switch (k) {
        case SigmaKind::Minus: s(1, 0) = 1.0; break;
        case SigmaKind::Plus: s(0, 1) = 1.0; break;
        case SigmaKind::Z:
            s(0, 0) = 1.0;
            s(1, 1) = -1.0;
            break;
    }
    return s;
}

inline Operator kron(const Operator& a, const Operator& b) {
    Operator out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline std::size_t hilbert_dim(std::size_t n_atoms) { return std::size_t{1} << n_atoms; }

// j is 1-based.
inline Operator sigma(std::size_t j, SigmaKind kind, std::size_t n_atoms) {
    if (j < 1 || j > n_atoms) throw std::out_of_range("atom index " + std::to_string(j) + " out of range");
    Operator out = Operator::Identity(1, 1);
    for (std::size_t k = 1; k <= n_atoms; ++k) out = kron(out, k == j ? single_sigma(kind) : Operator::Identity(2, 2));
    return out;
}

// Basis index of a product state; excited[j] true means atom j+1 is in |e>.
inline std::size_t basis_index(const std::vector<bool>& excited) {
    std::size_t idx = 0;
    for (bool e : excited) idx = (idx << 1) | (e ? 0u : 1u);
    return idx;
}

inline DensityMatrix product_state(const std::vector<bool>& excited) {
    const std::size_t d = hilbert_dim(excited.size());
    DensityMatrix r = DensityMatrix::Zero(d, d);
    const auto i = basis_index(excited);
    r(i, i) = 1.0;
    return r;
}

inline void check_dims(const Operator& a, const Operator& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw std::invalid_argument("operator dimension mismatch");
}

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

// O rho O^dag - (O^dag O rho + rho O^dag O)/2
inline Operator dissipator(const Operator& o, const DensityMatrix& rho) {
    check_dims(o, rho);
    const Operator od = o.adjoint();
    const Operator odo = od * o;
    return o * rho * od - 0.5 * (odo * rho + rho * odo);
}

// Lbar rho + rho Lbar^dag - Tr[(Lbar + Lbar^dag) rho] rho
inline Operator measurement_superop(const Operator& lbar, const DensityMatrix& rho) {
    check_dims(lbar, rho);
    const Operator ld = lbar.adjoint();
    const std::complex<double> x = ((lbar + ld) * rho).trace();
    return lbar * rho + rho * ld - x * rho;
}

// Tr(A B) without forming the product.
inline std::complex<double> trace_product(const Operator& a, const Operator& b) { return a.transpose().cwiseProduct(b).sum(); }

inline double expectation(const Operator& o, const DensityMatrix& rho) { return trace_product(o, rho).real(); }

inline double hermiticity_residual(const Operator& a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double purity(const DensityMatrix& rho) { return trace_product(rho, rho).real(); }

inline void hermitize(DensityMatrix& rho) { rho = 0.5 * (rho + rho.adjoint()).eval(); }

} // namespace wgqed
