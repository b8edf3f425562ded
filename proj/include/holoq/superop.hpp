// superop.hpp: coherence vectors over a Gell-Mann basis, and Lindblad supermatrices

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "holoq/errors.hpp"

namespace holoq {

using cplx = std::complex<double>;

constexpr int max_hilbert_dimension = 8;

struct OperatorBasis {
    int dimension{0};
    std::vector<Eigen::MatrixXcd> elements; // D^2 Hermitian matrices, element 0 = I/sqrt(D)

    int size() const { return dimension * dimension; }
};

struct CoherenceVector {
    int dimension{0};
    Eigen::VectorXcd coeffs;
};

enum class SuperopKind { hamiltonian, dissipative, total };

struct Superoperator {
    int dimension{0};
    Eigen::MatrixXcd matrix; // D^2 x D^2, acts on coherence vectors
    SuperopKind kind{SuperopKind::total};
};

namespace detail {

inline double max_abs(const Eigen::MatrixXcd& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline void require_hermitian(const Eigen::MatrixXcd& m, double tol, const char* what) {
    if (m.rows() != m.cols())
        throw dimension_error(std::string(what) + ": matrix is not square");
    const double dev = max_abs(m - m.adjoint());
    if (dev > tol)
        throw hermiticity_error(std::string(what) + ": not Hermitian (deviation " +
                                std::to_string(dev) + ")");
}

inline void require_dimension(const OperatorBasis& basis, Eigen::Index d, const char* what) {
    if (d != basis.dimension)
        throw dimension_error(std::string(what) + ": operator dimension " + std::to_string(d) +
                              " does not match basis dimension " +
                              std::to_string(basis.dimension));
}

// Tr(a^dagger b) without forming the product
inline cplx hs_inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a.conjugate().cwiseProduct(b)).sum();
}

} // namespace detail

inline OperatorBasis make_basis(int D) {
    if (D < 2)
        throw dimension_error("make_basis: dimension must be at least 2");
    if (D > max_hilbert_dimension)
        throw dimension_error("make_basis: dimension " + std::to_string(D) +
                              " exceeds the supported envelope of " +
                              std::to_string(max_hilbert_dimension));

    OperatorBasis basis;
    basis.dimension = D;
    basis.elements.reserve(static_cast<std::size_t>(D * D));
    const cplx I(0.0, 1.0);
    const double r2 = 1.0 / std::sqrt(2.0);

    basis.elements.push_back(Eigen::MatrixXcd::Identity(D, D) / std::sqrt(double(D)));
    for (int j = 0; j < D; ++j)
        for (int k = j + 1; k < D; ++k) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(D, D);
            m(j, k) = r2;
            m(k, j) = r2;
            basis.elements.push_back(std::move(m));
        }
    for (int j = 0; j < D; ++j)
        for (int k = j + 1; k < D; ++k) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(D, D);
            m(j, k) = -I * r2;
            m(k, j) = I * r2;
            basis.elements.push_back(std::move(m));
        }
    for (int l = 1; l < D; ++l) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(D, D);
        const double c = std::sqrt(1.0 / (double(l) * double(l + 1)));
        for (int j = 0; j < l; ++j) m(j, j) = c;
        m(l, l) = -double(l) * c;
        basis.elements.push_back(std::move(m));
    }
    return basis;
}

// Coefficients of an arbitrary (not necessarily Hermitian) operator.
inline Eigen::VectorXcd expand(const Eigen::MatrixXcd& x, const OperatorBasis& basis) {
    detail::require_dimension(basis, x.rows(), "expand");
    if (x.cols() != x.rows()) throw dimension_error("expand: operator is not square");
    Eigen::VectorXcd c(basis.size());
    for (int i = 0; i < basis.size(); ++i) c(i) = detail::hs_inner(basis.elements[std::size_t(i)], x);
    return c;
}

inline CoherenceVector vectorize(const Eigen::MatrixXcd& rho, const OperatorBasis& basis) {
    detail::require_dimension(basis, rho.rows(), "vectorize");
    detail::require_hermitian(rho, 1e-10, "vectorize");
    return {basis.dimension, expand(rho, basis)};
}

inline Eigen::MatrixXcd devectorize(const CoherenceVector& v, const OperatorBasis& basis) {
    if (v.coeffs.size() != basis.size())
        throw dimension_error("devectorize: coherence vector length does not match basis");
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(basis.dimension, basis.dimension);
    for (int i = 0; i < basis.size(); ++i) rho += v.coeffs(i) * basis.elements[std::size_t(i)];
    return rho;
}

// Matrix of a linear map X -> f(X) in the basis: L_ij = Tr(Lambda_i^dagger f(Lambda_j)).
template <class Map>
Eigen::MatrixXcd superop_matrix(const OperatorBasis& basis, Map&& f) {
    const int n = basis.size();
    Eigen::MatrixXcd L(n, n);
    for (int j = 0; j < n; ++j) {
        const Eigen::MatrixXcd image = f(basis.elements[std::size_t(j)]);
        for (int i = 0; i < n; ++i) L(i, j) = detail::hs_inner(basis.elements[std::size_t(i)], image);
    }
    return L;
}

inline Superoperator hamiltonian_superop(const Eigen::MatrixXcd& H, const OperatorBasis& basis) {
    detail::require_dimension(basis, H.rows(), "hamiltonian_superop");
    detail::require_hermitian(H, 1e-10, "hamiltonian_superop");
    const cplx I(0.0, 1.0);
    Superoperator s;
    s.dimension = basis.dimension;
    s.kind = SuperopKind::hamiltonian;
    s.matrix = superop_matrix(basis, [&](const Eigen::MatrixXcd& x) -> Eigen::MatrixXcd {
        return -I * (H * x - x * H);
    });
    return s;
}

inline Superoperator dissipator_superop(const std::vector<Eigen::MatrixXcd>& gammas,
                                        const OperatorBasis& basis) {
    const int D = basis.dimension;
    std::vector<Eigen::MatrixXcd> gg;
    gg.reserve(gammas.size());
    for (const auto& g : gammas) {
        if (g.rows() != D || g.cols() != D)
            throw dimension_error("dissipator_superop: Lindblad operator is not " +
                                  std::to_string(D) + "x" + std::to_string(D));
        gg.push_back(g.adjoint() * g);
    }
    Superoperator s;
    s.dimension = D;
    s.kind = SuperopKind::dissipative;
    s.matrix = superop_matrix(basis, [&](const Eigen::MatrixXcd& x) -> Eigen::MatrixXcd {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(D, D);
        for (std::size_t a = 0; a < gammas.size(); ++a)
            out += gammas[a] * x * gammas[a].adjoint() - 0.5 * (gg[a] * x + x * gg[a]);
        return out;
    });
    return s;
}

inline Superoperator total_superop(const Eigen::MatrixXcd& H,
                                   const std::vector<Eigen::MatrixXcd>& gammas,
                                   const OperatorBasis& basis) {
    Superoperator s = hamiltonian_superop(H, basis);
    if (!gammas.empty()) s.matrix += dissipator_superop(gammas, basis).matrix;
    s.kind = SuperopKind::total;
    return s;
}

} // namespace holoq
