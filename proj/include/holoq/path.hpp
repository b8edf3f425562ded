// path.hpp: parameter paths and gauge-smoothed block tracks along them

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "holoq/errors.hpp"
#include "holoq/parallel.hpp"
#include "holoq/spectral.hpp"
#include "holoq/superop.hpp"

namespace holoq {

constexpr std::size_t min_path_intervals = 16;

struct ParameterPath {
    std::function<Eigen::VectorXd(double)> map;
    std::size_t intervals{0}; // N; grid has N+1 points
    bool closed{true};

    double s(std::size_t k) const { return double(k) / double(intervals); }

    // A closed path evaluates s = 1 through s = 0 so the endpoints agree exactly.
    Eigen::VectorXd at(double s) const {
        if (closed && s >= 1.0) return map(0.0);
        return map(s);
    }

    std::vector<double> grid() const {
        std::vector<double> g(intervals + 1);
        for (std::size_t k = 0; k <= intervals; ++k) g[k] = s(k);
        return g;
    }

    ParameterPath with_intervals(std::size_t n) const {
        ParameterPath p = *this;
        p.intervals = n;
        p.validate();
        return p;
    }

    void validate() const {
        if (!map) throw path_error("parameter path has no parameter map");
        if (intervals < min_path_intervals)
            throw path_error("parameter path needs at least " + std::to_string(min_path_intervals) +
                             " intervals, got " + std::to_string(intervals));
    }
};

inline ParameterPath make_path(std::function<Eigen::VectorXd(double)> map, std::size_t n,
                               bool closed = true) {
    ParameterPath p{std::move(map), n, closed};
    p.validate();
    return p;
}

template <class F>
concept superoperator_family = std::invocable<const F&, const Eigen::VectorXd&> &&
    std::convertible_to<std::invoke_result_t<const F&, const Eigen::VectorXd&>, Superoperator>;

using SuperoperatorFamily = std::function<Superoperator(const Eigen::VectorXd&)>;

// L(s) = model(path(s))
template <superoperator_family F>
Superoperator evaluate_family(const F& model, const ParameterPath& path, double s) {
    return model(path.at(s));
}

template <superoperator_family F>
std::vector<Superoperator> sample_family(const ParameterPath& path, const F& model, unsigned threads = 1) {
    path.validate();
    const std::size_t N = path.intervals;
    std::vector<Superoperator> out(N + 1);
    const std::size_t last = path.closed ? N : N + 1;
    parallel_for(last, threads, [&](std::size_t k) {
        try {
            out[k] = model(path.at(path.s(k)));
        } catch (const error&) {
            throw;
        } catch (const std::exception& e) {
            throw model_error("model evaluation failed at s = " + std::to_string(path.s(k)) + ": " + e.what());
        }
        if (!out[k].matrix.allFinite())
            throw model_error("model produced non-finite entries at s = " + std::to_string(path.s(k)));
    });
    if (path.closed) out[N] = out[0];
    return out;
}

struct SmoothBlockTrack {
    int label{0};      // block index in the s_0 decomposition
    int group{0};      // degenerate set id, shared by blocks with one eigenvalue
    int degeneracy{1}; // number of blocks in the group
    int chain_length{1};
    bool closed{true};
    double cluster_tol{0.0};
    std::vector<double> s;
    std::vector<cplx> eigenvalue;
    std::vector<Eigen::MatrixXcd> right; // per point, n x chain_length
    std::vector<Eigen::MatrixXcd> left;  // per point, chain_length x n

    std::size_t intervals() const { return s.empty() ? 0 : s.size() - 1; }
};

struct TrackOptions {
    unsigned threads{1};
    double continuity_fraction{0.2}; // allowed eigenvalue step relative to the local gap
    double ambiguity_gap{1e-3};
    double min_overlap{0.5};
};

namespace detail {

// Bring one group of blocks at one grid point to the canonical per-point form:
// unit/orthonormal right vectors (canonical Toeplitz form for chains), left
// vectors recomputed as (E R')^{-1} E.
inline void normalize_group_point(Eigen::MatrixXcd& R, Eigen::MatrixXcd& E, int len) {
    const int width = int(R.cols());
    Eigen::MatrixXcd Rn;
    if (len > 1) {
        Rn = R;
        canonicalize_chain(Rn);
    } else if (width == 1) {
        Rn = R / R.norm();
    } else {
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(R);
        Rn = qr.householderQ() * Eigen::MatrixXcd::Identity(R.rows(), width);
    }
    const Eigen::MatrixXcd T = E * Rn;
    E = T.partialPivLu().solve(E);
    R = Rn;
}

// Unitary factor of the polar decomposition of F^{-1}: F U is Hermitian positive.
inline Eigen::MatrixXcd polar_align(const Eigen::MatrixXcd& F) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixV() * svd.matrixU().adjoint();
}

inline double min_singular(const Eigen::MatrixXcd& F) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(F);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

// U^(k/N) for unitary U via its Schur form (diagonal for normal matrices)
inline Eigen::MatrixXcd unitary_power(const Eigen::MatrixXcd& U, double t) {
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(U);
    const Eigen::MatrixXcd& Z = schur.matrixU();
    const Eigen::MatrixXcd& Tm = schur.matrixT();
    Eigen::VectorXcd d(U.rows());
    for (Eigen::Index i = 0; i < U.rows(); ++i) d(i) = std::exp(cplx(0.0, t * std::arg(Tm(i, i))));
    return Z * d.asDiagonal() * Z.adjoint();
}

// Sequential gauge alignment of one group along the grid, with the closing
// mismatch spread evenly over all steps for closed paths. R[k], E[k] hold the
// group's right columns and left rows; the last entry of a closed path is
// overwritten with the first.
inline void align_group(std::vector<Eigen::MatrixXcd>& R, std::vector<Eigen::MatrixXcd>& E, int len,
                        bool closed, double min_overlap) {
    const std::size_t npts = R.size();
    const std::size_t N = npts - 1;
    const bool chain = len > 1;
    for (std::size_t k = 0; k < npts; ++k) normalize_group_point(R[k], E[k], len);

    auto align_to = [&](std::size_t k, Eigen::MatrixXcd& Rn, Eigen::MatrixXcd& En) {
        const Eigen::MatrixXcd F = E[k] * Rn;
        if (chain) {
            const cplx f = F(0, 0);
            if (std::abs(f) < min_overlap)
                throw resolution_error("track_blocks: chain overlap " + std::to_string(std::abs(f)) +
                                           " below " + std::to_string(min_overlap) + " at s = " +
                                           std::to_string(double(k + 1) / double(N)),
                                       2 * N);
            const cplx u = std::conj(f) / std::abs(f);
            Rn *= u;
            En /= u;
        } else {
            const double smin = min_singular(F);
            if (smin < min_overlap)
                throw resolution_error("track_blocks: overlap " + std::to_string(smin) + " below " +
                                           std::to_string(min_overlap) + " at s = " +
                                           std::to_string(double(k + 1) / double(N)),
                                       2 * N);
            const Eigen::MatrixXcd W = polar_align(F);
            Rn = Rn * W;
            En = W.adjoint() * En;
        }
    };

    const std::size_t last = closed ? N : npts;
    for (std::size_t k = 1; k < last; ++k) align_to(k - 1, R[k], E[k]);
    if (!closed) return;

    // closing mismatch against the (identified) first point
    Eigen::MatrixXcd R0 = R[0], E0 = E[0];
    const Eigen::MatrixXcd F = E[N - 1] * R0;
    Eigen::MatrixXcd Uc;
    if (chain) {
        Uc = Eigen::MatrixXcd::Identity(1, 1) * (F(0, 0) / std::abs(F(0, 0)));
    } else {
        if (min_singular(F) < min_overlap)
            throw resolution_error("track_blocks: closing overlap too small", 2 * N);
        Uc = polar_align(F).adjoint();
    }
    for (std::size_t k = 1; k < N; ++k) {
        const Eigen::MatrixXcd Om = unitary_power(Uc, double(k) / double(N));
        if (chain) {
            R[k] *= Om(0, 0);
            E[k] /= Om(0, 0);
        } else {
            R[k] = R[k] * Om;
            E[k] = Om.adjoint() * E[k];
        }
    }
    R[N] = R[0];
    E[N] = E[0];
}

struct group_view {
    cplx lambda;
    std::vector<int> members; // block indices
    int len{1};
    bool mixed{false};
    Eigen::MatrixXcd R, E;
};

inline std::vector<group_view> groups_of(const JordanDecomposition& dec) {
    std::vector<group_view> g(std::size_t(dec.cluster_count));
    const int n = dec.size;
    for (std::size_t b = 0; b < dec.blocks.size(); ++b) {
        const auto& blk = dec.blocks[b];
        auto& gv = g[std::size_t(blk.cluster)];
        if (gv.members.empty()) gv.len = blk.chain_length;
        else if (gv.len != blk.chain_length) gv.mixed = true;
        gv.lambda = blk.eigenvalue;
        gv.members.push_back(int(b));
    }
    for (auto& gv : g) {
        int w = 0;
        for (int b : gv.members) w += dec.blocks[std::size_t(b)].chain_length;
        gv.R.resize(n, w);
        gv.E.resize(w, n);
        int c = 0;
        for (int b : gv.members) {
            const auto& blk = dec.blocks[std::size_t(b)];
            gv.R.middleCols(c, blk.chain_length) = blk.right;
            gv.E.middleRows(c, blk.chain_length) = blk.left;
            c += blk.chain_length;
        }
    }
    return g;
}

inline std::vector<int> signature(const group_view& g) {
    std::vector<int> sig;
    sig.push_back(int(g.members.size()));
    sig.push_back(g.mixed ? -1 : g.len);
    return sig;
}

} // namespace detail

// Decompose every sample, match degenerate groups between neighbouring points
// by projector overlap and return gauge-smoothed tracks, one per block of the
// s_0 decomposition. Closedness is read off the samples (first == last).
inline std::vector<SmoothBlockTrack> track_blocks(const std::vector<Superoperator>& samples,
                                                  std::optional<double> cluster_tol = std::nullopt,
                                                  const TrackOptions& opt = {}) {
    if (samples.size() < 2) throw path_error("track_blocks: need at least two samples");
    const std::size_t npts = samples.size();
    const std::size_t N = npts - 1;
    const bool closed = samples.front().matrix == samples.back().matrix;

    double tol = 0.0;
    if (cluster_tol) {
        tol = *cluster_tol;
    } else {
        for (const auto& L : samples) tol = std::max(tol, default_cluster_tol(L.matrix));
    }

    const std::size_t ndec = closed ? N : npts;
    std::vector<JordanDecomposition> decs(ndec);
    parallel_for(ndec, opt.threads, [&](std::size_t k) {
        DecomposeOptions dopt;
        dopt.cluster_tol = tol;
        try {
            decs[k] = decompose(samples[k].matrix, dopt);
        } catch (const ill_conditioned_error& e) {
            throw ill_conditioned_error(std::string(e.what()) + " at s = " + std::to_string(double(k) / double(N)),
                                        e.residual);
        }
    });

    std::vector<std::vector<detail::group_view>> groups(npts);
    for (std::size_t k = 0; k < ndec; ++k) groups[k] = detail::groups_of(decs[k]);
    if (closed) groups[N] = groups[0];

    auto multiset = [](const std::vector<detail::group_view>& gs) {
        std::vector<std::vector<int>> sig;
        for (const auto& g : gs) sig.push_back(detail::signature(g));
        std::sort(sig.begin(), sig.end());
        return sig;
    };
    const auto sig0 = multiset(groups[0]);
    for (const auto& g : groups[0])
        if (g.mixed || (g.len > 1 && g.members.size() > 1))
            throw degeneracy_error("track_blocks: degenerate sets of Jordan chains are not supported");
    for (std::size_t k = 1; k < npts; ++k)
        if (multiset(groups[k]) != sig0)
            throw structure_change_error("track_blocks: Jordan block structure changes at s = " +
                                             std::to_string(double(k) / double(N)),
                                         double(k) / double(N));

    // follow each s_0 group through the grid
    const std::size_t G = groups[0].size();
    std::vector<std::vector<int>> route(G, std::vector<int>(npts, -1));
    for (std::size_t a = 0; a < G; ++a) route[a][0] = int(a);
    for (std::size_t k = 0; k + 1 < npts; ++k) {
        const auto& cur = groups[k];
        const auto& nxt = groups[k + 1];
        const double sk1 = double(k + 1) / double(N);
        std::vector<int> next_of(cur.size(), -1);
        std::vector<bool> taken(nxt.size(), false);
        for (std::size_t a = 0; a < cur.size(); ++a) {
            const double dim = double(cur[a].R.cols());
            double best = -1.0, second = -1.0;
            int ib = -1, is = -1;
            for (std::size_t b = 0; b < nxt.size(); ++b) {
                if (detail::signature(cur[a]) != detail::signature(nxt[b])) continue;
                const Eigen::MatrixXcd P = (cur[a].E * nxt[b].R) * (nxt[b].E * cur[a].R);
                const double score = std::abs(P.trace()) / dim;
                if (score > best) {
                    second = best;
                    is = ib;
                    best = score;
                    ib = int(b);
                } else if (score > second) {
                    second = score;
                    is = int(b);
                }
            }
            if (ib < 0)
                throw structure_change_error("track_blocks: no partner block at s = " + std::to_string(sk1), sk1);
            if (is >= 0 && best - second < opt.ambiguity_gap) {
                const double d1 = std::abs(nxt[std::size_t(ib)].lambda - cur[a].lambda);
                const double d2 = std::abs(nxt[std::size_t(is)].lambda - cur[a].lambda);
                if (std::abs(d1 - d2) <= tol)
                    throw matching_ambiguity_error("track_blocks: ambiguous block matching at s = " +
                                                       std::to_string(sk1),
                                                   sk1);
                if (d2 < d1) ib = is;
            }
            if (taken[std::size_t(ib)])
                throw matching_ambiguity_error("track_blocks: two blocks claim the same partner at s = " +
                                                   std::to_string(sk1),
                                               sk1);
            taken[std::size_t(ib)] = true;
            next_of[a] = ib;
        }
        // eigenvalue continuity against the local gap
        for (std::size_t a = 0; a < cur.size(); ++a) {
            double gap = std::numeric_limits<double>::infinity();
            for (std::size_t b = 0; b < cur.size(); ++b)
                if (b != a) gap = std::min(gap, std::abs(cur[b].lambda - cur[a].lambda));
            const double step = std::abs(nxt[std::size_t(next_of[a])].lambda - cur[a].lambda);
            if (std::isfinite(gap) && step > opt.continuity_fraction * gap)
                throw resolution_error("track_blocks: eigenvalue moves " + std::to_string(step) +
                                           " in one step near s = " + std::to_string(sk1) +
                                           ", local gap " + std::to_string(gap),
                                       2 * N);
        }
        for (std::size_t a = 0; a < G; ++a) route[a][k + 1] = next_of[std::size_t(route[a][k])];
    }
    if (closed)
        for (std::size_t a = 0; a < G; ++a)
            if (route[a][N] != int(a))
                throw structure_change_error("track_blocks: blocks are permuted around the loop", 1.0);

    std::vector<SmoothBlockTrack> tracks(decs[0].blocks.size());
    for (std::size_t a = 0; a < G; ++a) {
        std::vector<Eigen::MatrixXcd> R(npts), E(npts);
        std::vector<cplx> lam(npts);
        for (std::size_t k = 0; k < npts; ++k) {
            const auto& gv = groups[k][std::size_t(route[a][k])];
            R[k] = gv.R;
            E[k] = gv.E;
            lam[k] = gv.lambda;
        }
        const auto& g0 = groups[0][a];
        detail::align_group(R, E, g0.len, closed, opt.min_overlap);
        for (std::size_t m = 0; m < g0.members.size(); ++m) {
            SmoothBlockTrack t;
            t.label = g0.members[m];
            t.group = int(a);
            t.degeneracy = int(g0.members.size());
            t.chain_length = g0.len;
            t.closed = closed;
            t.cluster_tol = tol;
            t.eigenvalue = lam;
            t.s.resize(npts);
            t.right.resize(npts);
            t.left.resize(npts);
            for (std::size_t k = 0; k < npts; ++k) {
                t.s[k] = double(k) / double(N);
                t.right[k] = R[k].middleCols(Eigen::Index(m) * g0.len, g0.len);
                t.left[k] = E[k].middleRows(Eigen::Index(m) * g0.len, g0.len);
            }
            tracks[std::size_t(t.label)] = std::move(t);
        }
    }
    return tracks;
}

// All tracks belonging to one degenerate set, in label order.
inline std::vector<SmoothBlockTrack> group_members(const std::vector<SmoothBlockTrack>& tracks, int group) {
    std::vector<SmoothBlockTrack> out;
    for (const auto& t : tracks)
        if (t.group == group) out.push_back(t);
    return out;
}

// Re-derive the canonical smooth gauge of a degenerate set from tracks in any gauge.
inline std::vector<SmoothBlockTrack> canonical_gauge(std::vector<SmoothBlockTrack> members,
                                                     double min_overlap = 0.5) {
    if (members.empty()) return members;
    const std::size_t npts = members[0].s.size();
    const int len = members[0].chain_length;
    const Eigen::Index n = members[0].right[0].rows();
    const Eigen::Index w = Eigen::Index(members.size()) * len;
    std::vector<Eigen::MatrixXcd> R(npts, Eigen::MatrixXcd(n, w)), E(npts, Eigen::MatrixXcd(w, n));
    for (std::size_t k = 0; k < npts; ++k)
        for (std::size_t m = 0; m < members.size(); ++m) {
            R[k].middleCols(Eigen::Index(m) * len, len) = members[m].right[k];
            E[k].middleRows(Eigen::Index(m) * len, len) = members[m].left[k];
        }
    detail::align_group(R, E, len, members[0].closed, min_overlap);
    for (std::size_t k = 0; k < npts; ++k)
        for (std::size_t m = 0; m < members.size(); ++m) {
            members[m].right[k] = R[k].middleCols(Eigen::Index(m) * len, len);
            members[m].left[k] = E[k].middleRows(Eigen::Index(m) * len, len);
        }
    return members;
}

} // namespace holoq
