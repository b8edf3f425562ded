// spectral.hpp: numerical Jordan structure and bi-orthonormal left/right chains

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "holoq/errors.hpp"
#include "holoq/superop.hpp"

namespace holoq {

struct JordanBlockBasis {
    cplx eigenvalue;
    int chain_length{1};
    int cluster{0};         // blocks sharing a cluster have the same eigenvalue
    Eigen::MatrixXcd right; // n x chain_length, column j is D^(j)
    Eigen::MatrixXcd left;  // chain_length x n, row i is E^(i)
};

struct JordanDecomposition {
    std::vector<JordanBlockBasis> blocks;
    int size{0}; // D^2
    double cluster_tolerance{0.0};
    int cluster_count{0};

    // right vectors as columns, in block order
    Eigen::MatrixXcd right_matrix() const {
        Eigen::MatrixXcd S(size, size);
        int c = 0;
        for (const auto& b : blocks) {
            S.middleCols(c, b.chain_length) = b.right;
            c += b.chain_length;
        }
        return S;
    }
    Eigen::MatrixXcd left_matrix() const {
        Eigen::MatrixXcd E(size, size);
        int r = 0;
        for (const auto& b : blocks) {
            E.middleRows(r, b.chain_length) = b.left;
            r += b.chain_length;
        }
        return E;
    }
};

struct ResidualReport {
    double biorthonormality{0.0};
    double chain{0.0};
    double completeness{0.0};
};

struct DecomposeOptions {
    std::optional<double> cluster_tol; // default 1e-8 * ||L||_2
    double rank_tol{1e-10};            // relative to sigma_max
    double biortho_tol{1e-10};
};

inline double spectral_norm(const Eigen::MatrixXcd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(0);
}

inline double default_cluster_tol(const Eigen::MatrixXcd& L) { return 1e-8 * spectral_norm(L); }

namespace detail {

// Make the largest-magnitude entry real positive; near-ties go to the lowest index.
inline cplx phase_convention(const Eigen::VectorXcd& v) {
    if (v.size() == 0) return 1.0;
    const double top = v.cwiseAbs().maxCoeff();
    if (top == 0.0) return 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) >= top * (1.0 - 1e-12)) return std::conj(v(i)) / std::abs(v(i));
    return 1.0;
}

// Sort key used for blocks and clusters.
inline bool eig_before(cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() < b.imag();
}

// Re descending, then Im ascending among entries whose real parts agree to tie_tol
// (measured from the first entry of a run) so round-off cannot swap a pair like -g +- i w.
template <class T, class Key>
void sort_spectrum(std::vector<T>& v, Key key, double tie_tol) {
    std::stable_sort(v.begin(), v.end(), [&](const T& a, const T& b) { return key(a).real() > key(b).real(); });
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i + 1;
        while (j < v.size() && key(v[i]).real() - key(v[j]).real() <= tie_tol) ++j;
        std::stable_sort(v.begin() + std::ptrdiff_t(i), v.begin() + std::ptrdiff_t(j),
                         [&](const T& a, const T& b) { return key(a).imag() < key(b).imag(); });
        i = j;
    }
}

inline Eigen::MatrixXcd null_basis(const Eigen::MatrixXcd& m, int dim) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
    return svd.matrixV().rightCols(dim);
}

inline int numerical_rank(const Eigen::MatrixXcd& m, double tau) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tau) ++r;
    return r;
}

struct chain_seed {
    int length;
    Eigen::VectorXcd top;
};

// Jordan chains of a nilpotent m x m matrix C. Returns std::nullopt when the
// rank profile is inconsistent with nilpotency at this threshold.
inline std::optional<std::vector<chain_seed>> nilpotent_chains(const Eigen::MatrixXcd& C,
                                                               double tau) {
    const int m = int(C.rows());
    const double scale = std::max(1.0, spectral_norm(C));
    std::vector<int> rank(std::size_t(m) + 1, 0);
    rank[0] = m;
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(m, m);
    for (int j = 1; j <= m; ++j) {
        P = P * C;
        rank[std::size_t(j)] = numerical_rank(P, tau * std::pow(scale, j - 1));
        if (rank[std::size_t(j)] > rank[std::size_t(j - 1)]) return std::nullopt;
    }
    if (rank[std::size_t(m)] != 0) return std::nullopt;

    // number of chains with length >= k
    std::vector<int> at_least(std::size_t(m) + 2, 0);
    for (int k = 1; k <= m; ++k)
        at_least[std::size_t(k)] = rank[std::size_t(k - 1)] - rank[std::size_t(k)];
    for (int k = 1; k < m; ++k)
        if (at_least[std::size_t(k)] < at_least[std::size_t(k + 1)]) return std::nullopt;

    std::vector<Eigen::MatrixXcd> kernels(std::size_t(m) + 1);
    P = Eigen::MatrixXcd::Identity(m, m);
    kernels[0] = Eigen::MatrixXcd(m, 0);
    for (int j = 1; j <= m; ++j) {
        P = P * C;
        kernels[std::size_t(j)] = null_basis(P, m - rank[std::size_t(j)]);
    }

    std::vector<chain_seed> chains;
    for (int k = m; k >= 1; --k) {
        int need = at_least[std::size_t(k)] - at_least[std::size_t(k + 1)];
        if (need == 0) continue;

        // orthonormal basis of K_{k-1} + level-k members of longer chains
        std::vector<Eigen::VectorXcd> avoid;
        auto absorb = [&](Eigen::VectorXcd v) {
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& q : avoid) v -= q.dot(v) * q;
            const double nv = v.norm();
            if (nv > 1e-12) avoid.push_back(v / nv);
        };
        const auto& below = kernels[std::size_t(k - 1)];
        for (Eigen::Index c = 0; c < below.cols(); ++c) absorb(below.col(c));
        for (const auto& ch : chains) {
            Eigen::VectorXcd v = ch.top;
            for (int p = 0; p < ch.length - k; ++p) v = C * v;
            absorb(v);
        }

        const auto& cand = kernels[std::size_t(k)];
        std::vector<bool> used(std::size_t(cand.cols()), false);
        while (need-- > 0) {
            int best = -1;
            double best_norm = -1.0;
            Eigen::VectorXcd best_res;
            for (Eigen::Index c = 0; c < cand.cols(); ++c) {
                if (used[std::size_t(c)]) continue;
                Eigen::VectorXcd r = cand.col(c);
                for (int pass = 0; pass < 2; ++pass)
                    for (const auto& q : avoid) r -= q.dot(r) * q;
                if (r.norm() > best_norm) {
                    best_norm = r.norm();
                    best = int(c);
                    best_res = r;
                }
            }
            if (best < 0 || best_norm < 1e-8) return std::nullopt;
            used[std::size_t(best)] = true;
            best_res /= best_norm;
            chains.push_back({k, best_res});
            avoid.push_back(best_res);
        }
    }
    return chains;
}

// Canonical chain gauge: unit eigenvector, higher members orthogonal to it,
// largest eigenvector component real positive.
inline void canonicalize_chain(Eigen::MatrixXcd& chain) {
    const int n = int(chain.cols());
    chain /= chain.col(0).norm();
    if (n > 1) {
        const Eigen::VectorXcd d0 = chain.col(0);
        std::vector<cplx> coef(std::size_t(n), cplx(0.0));
        coef[0] = 1.0;
        const cplx g00 = d0.dot(d0);
        for (int j = 1; j < n; ++j) {
            cplx acc = 0.0;
            for (int i = 0; i < j; ++i) acc += coef[std::size_t(i)] * d0.dot(chain.col(j - i));
            coef[std::size_t(j)] = -acc / g00;
        }
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(chain.rows(), n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i <= j; ++i) out.col(j) += coef[std::size_t(i)] * chain.col(j - i);
        chain = out;
    }
    chain *= phase_convention(chain.col(0));
}

} // namespace detail

inline JordanDecomposition decompose(const Eigen::MatrixXcd& L, const DecomposeOptions& opt = {}) {
    if (L.rows() != L.cols() || L.rows() == 0)
        throw dimension_error("decompose: matrix must be square and nonempty");
    if (!L.allFinite()) throw error("decompose: matrix has non-finite entries");
    const int n = int(L.rows());
    const double lnorm = spectral_norm(L);
    const double tol = opt.cluster_tol ? *opt.cluster_tol : 1e-8 * lnorm;
    if (!(tol >= 0.0)) throw error("decompose: cluster tolerance must be nonnegative");

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(L, false);
    if (es.info() != Eigen::Success) throw non_convergence_error("decompose: eigensolver failed");
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
    detail::sort_spectrum(ev, [](cplx z) { return z; }, tol);

    // single-linkage clustering
    const auto nn = std::size_t(n);
    std::vector<std::size_t> parent(nn);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t a = 0; a < nn; ++a)
        for (std::size_t b = a + 1; b < nn; ++b)
            if (std::abs(ev[a] - ev[b]) <= tol) parent[find(b)] = find(a);

    struct cluster_t {
        cplx mean;
        int mult;
    };
    std::vector<cluster_t> clusters;
    {
        std::vector<int> root_to(nn, -1);
        std::vector<cplx> sum;
        std::vector<int> cnt;
        for (std::size_t a = 0; a < nn; ++a) {
            const std::size_t r = find(a);
            if (root_to[r] < 0) {
                root_to[r] = int(sum.size());
                sum.push_back(0.0);
                cnt.push_back(0);
            }
            sum[std::size_t(root_to[r])] += ev[a];
            ++cnt[std::size_t(root_to[r])];
        }
        for (std::size_t c = 0; c < sum.size(); ++c) clusters.push_back({sum[c] / double(cnt[c]), cnt[c]});
        detail::sort_spectrum(clusters, [](const cluster_t& c) { return c.mean; }, tol);
    }

    JordanDecomposition dec;
    dec.size = n;
    dec.cluster_tolerance = tol;
    dec.cluster_count = int(clusters.size());

    const Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(n, n);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const cplx mu = clusters[c].mean;
        const int m = clusters[c].mult;
        const Eigen::MatrixXcd A = L - mu * Id;

        if (m == 1) {
            JordanBlockBasis b;
            b.eigenvalue = mu;
            b.chain_length = 1;
            b.cluster = int(c);
            b.right = detail::null_basis(A, 1);
            detail::canonicalize_chain(b.right);
            dec.blocks.push_back(std::move(b));
            continue;
        }

        // generalized eigenspace from the m smallest singular directions of A^m
        const double s = std::max(1.0, spectral_norm(A));
        const Eigen::MatrixXcd As = A / s;
        Eigen::MatrixXcd P = As;
        for (int p = 1; p < m; ++p) P = P * As;
        const Eigen::MatrixXcd Q = detail::null_basis(P, m);
        const Eigen::MatrixXcd C = Q.adjoint() * A * Q;

        double tau = std::max(opt.rank_tol * spectral_norm(A), tol);
        std::optional<std::vector<detail::chain_seed>> seeds;
        for (int attempt = 0; attempt < 4 && !seeds; ++attempt) {
            seeds = detail::nilpotent_chains(C, tau);
            tau *= 100.0;
        }
        if (!seeds)
            throw non_convergence_error("decompose: inconsistent Jordan structure for cluster at " +
                                        std::to_string(mu.real()) + "+" + std::to_string(mu.imag()) + "i");

        std::vector<JordanBlockBasis> cb;
        for (const auto& sd : *seeds) {
            Eigen::MatrixXcd small(m, sd.length);
            small.col(sd.length - 1) = sd.top;
            for (int j = sd.length - 1; j > 0; --j) small.col(j - 1) = C * small.col(j);
            JordanBlockBasis b;
            b.eigenvalue = mu;
            b.chain_length = sd.length;
            b.cluster = int(c);
            b.right = Q * small;
            detail::canonicalize_chain(b.right);
            cb.push_back(std::move(b));
        }
        std::stable_sort(cb.begin(), cb.end(), [](const JordanBlockBasis& a, const JordanBlockBasis& b) {
            return a.chain_length > b.chain_length;
        });
        for (auto& b : cb) dec.blocks.push_back(std::move(b));
    }

    const Eigen::MatrixXcd S = dec.right_matrix();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(S);
    if (!lu.isInvertible())
        throw ill_conditioned_error("decompose: right basis is singular",
                                    std::numeric_limits<double>::infinity());
    Eigen::MatrixXcd X = lu.inverse();
    X = X + X * (Id - S * X); // one Newton-Schulz refinement step
    const double resid = detail::max_abs(X * S - Id);
    if (!(resid <= opt.biortho_tol))
        throw ill_conditioned_error("decompose: bi-orthonormality residual " + std::to_string(resid) +
                                        " exceeds tolerance",
                                    resid);
    int r = 0;
    for (auto& b : dec.blocks) {
        b.left = X.middleRows(r, b.chain_length);
        r += b.chain_length;
    }
    return dec;
}

inline JordanDecomposition decompose(const Eigen::MatrixXcd& L, std::optional<double> cluster_tol) {
    DecomposeOptions opt;
    opt.cluster_tol = cluster_tol;
    return decompose(L, opt);
}

inline JordanDecomposition decompose(const Superoperator& L, std::optional<double> cluster_tol = std::nullopt) {
    return decompose(L.matrix, cluster_tol);
}

inline ResidualReport verify(const JordanDecomposition& dec, const Eigen::MatrixXcd& L) {
    if (L.rows() != dec.size || L.cols() != dec.size)
        throw dimension_error("verify: decomposition and matrix sizes differ");
    ResidualReport rep;
    const Eigen::MatrixXcd S = dec.right_matrix();
    const Eigen::MatrixXcd E = dec.left_matrix();
    const Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(dec.size, dec.size);
    rep.biorthonormality = detail::max_abs(E * S - Id);
    rep.completeness = detail::max_abs(S * E - Id);
    for (const auto& b : dec.blocks) {
        const int nb = b.chain_length;
        for (int j = 0; j < nb; ++j) {
            Eigen::VectorXcd res = L * b.right.col(j) - b.eigenvalue * b.right.col(j);
            if (j > 0) res -= b.right.col(j - 1);
            rep.chain = std::max(rep.chain, res.cwiseAbs().maxCoeff());
            Eigen::RowVectorXcd lres = b.left.row(j) * L - b.eigenvalue * b.left.row(j);
            if (j + 1 < nb) lres -= b.left.row(j + 1);
            rep.chain = std::max(rep.chain, lres.cwiseAbs().maxCoeff());
        }
    }
    return rep;
}

inline ResidualReport verify(const JordanDecomposition& dec, const Superoperator& L) {
    return verify(dec, L.matrix);
}

// S J S^{-1} rebuilt from the blocks
inline Eigen::MatrixXcd reconstruct(const JordanDecomposition& dec) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dec.size, dec.size);
    for (const auto& b : dec.blocks) {
        out += b.eigenvalue * b.right * b.left;
        for (int j = 1; j < b.chain_length; ++j) out += b.right.col(j - 1) * b.left.row(j);
    }
    return out;
}

} // namespace holoq
