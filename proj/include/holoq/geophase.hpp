// geophase.hpp: Abelian loop phases and Wilson loops over degenerate sets.
// The closed-system Berry phase lives here too, as a reference.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "holoq/errors.hpp"
#include "holoq/path.hpp"
#include "holoq/superop.hpp"

namespace holoq {

// product: first-order sum of step logarithms.
// symmetric: time-reversible step (second order, gauge covariant per step).
// extrapolated: symmetric steps at strides 1, 2, 4 combined by two Richardson
// levels; needs N divisible by 4 and falls back to symmetric otherwise.
enum class PhaseScheme { product, symmetric, extrapolated };

inline const char* to_string(PhaseScheme s) {
    switch (s) {
    case PhaseScheme::product: return "product";
    case PhaseScheme::symmetric: return "symmetric";
    case PhaseScheme::extrapolated: return "extrapolated";
    }
    return "?";
}

struct AbelianPhase {
    int label{0};
    cplx gamma;              // real part unwrapped
    double re_mod_2pi{0.0};  // reported representative, see mod_2pi
    std::size_t n_grid{0};
    double cluster_tol{0.0};
    PhaseScheme scheme{PhaseScheme::extrapolated};
};

struct HolonomyMatrix {
    cplx eigenvalue;
    int degeneracy{1};
    Eigen::MatrixXcd wilson;
    Eigen::VectorXcd eigenvalues; // sorted by argument
    std::size_t n_grid{0};
    PhaseScheme scheme{PhaseScheme::extrapolated};
};

inline double wrap_pi(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::remainder(x, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    return r;
}

// Reporting representative in [-pi, pi). Values within branch_snap of the cut
// land on -pi so round-off cannot flip a phase of pi between the two ends.
constexpr double branch_snap = 1e-9;

inline double mod_2pi(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return x - two_pi * std::floor((x + std::numbers::pi + branch_snap) / two_pi);
}

// distance between two angles on the circle
inline double angle_distance(double a, double b) { return std::abs(wrap_pi(a - b)); }

namespace detail {

inline void require_loop_track(const SmoothBlockTrack& t, const char* what) {
    if (!t.closed) throw path_error(std::string(what) + ": track does not come from a closed path");
    if (t.chain_length != 1)
        throw degeneracy_error(std::string(what) + ": block has a Jordan chain of length " +
                               std::to_string(t.chain_length) + "; use ladder_integrate");
}

inline PhaseScheme effective_scheme(PhaseScheme s, std::size_t N) {
    if (s == PhaseScheme::extrapolated && N % 4 != 0) return PhaseScheme::symmetric;
    return s;
}

inline double align_2pi(double ref, double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return x + two_pi * std::round((ref - x) / two_pi);
}

// i * sum over k of the step logarithm at stride m
inline cplx stride_phase(const SmoothBlockTrack& t, std::size_t m, bool symmetric) {
    const std::size_t N = t.intervals();
    cplx sum = 0.0;
    for (std::size_t k = 0; k < N; k += m) {
        const cplx f = (t.left[k] * t.right[k + m])(0, 0);
        if (!symmetric) {
            sum += std::log(f);
            continue;
        }
        const cplx g = (t.left[k + m] * t.right[k])(0, 0);
        sum += std::log(f) - 0.5 * std::log(f * g);
    }
    return cplx(0.0, 1.0) * sum;
}

inline void check_resolution(const SmoothBlockTrack& t, bool symmetric) {
    const std::size_t N = t.intervals();
    for (std::size_t k = 0; k < N; ++k) {
        const cplx f = (t.left[k] * t.right[k + 1])(0, 0);
        // the symmetric form only needs the gauge-invariant projector overlap near 1
        const cplx q = symmetric ? f * (t.left[k + 1] * t.right[k])(0, 0) : f;
        if (std::abs(q - 1.0) > 0.5)
            throw resolution_error("abelian_phase: step factor at s = " + std::to_string(t.s[k]) +
                                       " is too far from 1; refine the grid",
                                   2 * N);
    }
}

inline Eigen::MatrixXcd stack_right(const std::vector<SmoothBlockTrack>& ts, std::size_t k) {
    Eigen::MatrixXcd R(ts[0].right[k].rows(), Eigen::Index(ts.size()));
    for (std::size_t i = 0; i < ts.size(); ++i) R.col(Eigen::Index(i)) = ts[i].right[k].col(0);
    return R;
}

inline Eigen::MatrixXcd stack_left(const std::vector<SmoothBlockTrack>& ts, std::size_t k) {
    Eigen::MatrixXcd E(Eigen::Index(ts.size()), ts[0].left[k].cols());
    for (std::size_t i = 0; i < ts.size(); ++i) E.row(Eigen::Index(i)) = ts[i].left[k].row(0);
    return E;
}

inline void require_degenerate_set(const std::vector<SmoothBlockTrack>& ts, const char* what) {
    if (ts.empty()) throw error(std::string(what) + ": no tracks given");
    const std::size_t npts = ts[0].s.size();
    for (const auto& t : ts) {
        if (t.chain_length != 1)
            throw degeneracy_error(std::string(what) + ": tracks must be one-dimensional blocks");
        if (t.s.size() != npts) throw dimension_error(std::string(what) + ": tracks have different grids");
    }
    for (std::size_t k = 0; k < npts; ++k)
        for (const auto& t : ts) {
            const double tol = std::max(t.cluster_tol, 1e-12 * std::max(1.0, std::abs(ts[0].eigenvalue[k])));
            if (std::abs(t.eigenvalue[k] - ts[0].eigenvalue[k]) > tol)
                throw not_degenerate_error(std::string(what) + ": tracks do not share an eigenvalue at s = " +
                                           std::to_string(ts[0].s[k]));
        }
}

// time-reversible transfer G (F G)^{-1/2}
inline Eigen::MatrixXcd symmetric_transfer(const Eigen::MatrixXcd& F, const Eigen::MatrixXcd& Gm) {
    const Eigen::MatrixXcd X = F * Gm;
    const Eigen::MatrixXcd root = X.sqrt();
    return Gm * root.partialPivLu().inverse();
}

inline Eigen::MatrixXcd stride_wilson(const std::vector<SmoothBlockTrack>& ts, std::size_t m, bool symmetric) {
    const std::size_t N = ts[0].intervals();
    const Eigen::Index G = Eigen::Index(ts.size());
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(G, G);
    for (std::size_t k = 0; k < N; k += m) {
        const Eigen::MatrixXcd Gm = stack_left(ts, k + m) * stack_right(ts, k);
        if (!symmetric) {
            U = Gm * U;
            continue;
        }
        const Eigen::MatrixXcd F = stack_left(ts, k) * stack_right(ts, k + m);
        U = symmetric_transfer(F, Gm) * U;
    }
    return U;
}

inline Eigen::VectorXcd sorted_eigenvalues(const Eigen::MatrixXcd& U) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(U, false);
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
        if (std::arg(a) != std::arg(b)) return std::arg(a) < std::arg(b);
        return std::abs(a) < std::abs(b);
    });
    Eigen::VectorXcd out(Eigen::Index(ev.size()));
    for (std::size_t i = 0; i < ev.size(); ++i) out(Eigen::Index(i)) = ev[i];
    return out;
}

} // namespace detail

// gamma = i * loop integral of <<E|dD>>, evaluated from overlaps of neighbouring
// grid points. Invariant (mod 2 pi) under any per-point rescaling of the track.
inline AbelianPhase abelian_phase(const SmoothBlockTrack& track, PhaseScheme scheme = PhaseScheme::extrapolated) {
    detail::require_loop_track(track, "abelian_phase");
    if (track.degeneracy != 1)
        throw degeneracy_error("abelian_phase: block belongs to a " + std::to_string(track.degeneracy) +
                               "-fold degenerate set; use wilson_loop");
    const std::size_t N = track.intervals();
    scheme = detail::effective_scheme(scheme, N);
    const bool sym = scheme != PhaseScheme::product;
    detail::check_resolution(track, sym);

    cplx gamma = detail::stride_phase(track, 1, sym);
    if (scheme == PhaseScheme::extrapolated) {
        cplx g2 = detail::stride_phase(track, 2, true);
        cplx g4 = detail::stride_phase(track, 4, true);
        g2.real(detail::align_2pi(gamma.real(), g2.real()));
        g4.real(detail::align_2pi(gamma.real(), g4.real()));
        const cplx r12 = (4.0 * gamma - g2) / 3.0;
        const cplx r24 = (4.0 * g2 - g4) / 3.0;
        gamma = (16.0 * r12 - r24) / 15.0;
    }
    AbelianPhase out;
    out.label = track.label;
    out.gamma = gamma;
    out.re_mod_2pi = mod_2pi(gamma.real());
    out.n_grid = N;
    out.cluster_tol = track.cluster_tol;
    out.scheme = scheme;
    return out;
}

// Amplitude transport factors p(s_k)/p(s_0) along an open stretch of a 1-D
// track, using the symmetric step. Entry N closes the loop.
inline std::vector<cplx> transport_factors(const SmoothBlockTrack& track) {
    const std::size_t N = track.intervals();
    std::vector<cplx> t(N + 1);
    t[0] = 1.0;
    for (std::size_t k = 0; k < N; ++k) {
        const cplx f = (track.left[k] * track.right[k + 1])(0, 0);
        const cplx g = (track.left[k + 1] * track.right[k])(0, 0);
        t[k + 1] = t[k] * g / std::sqrt(f * g);
    }
    return t;
}

// A^{(ij)} = <<E^(i)(s_k)| d/ds |D^(j)(s_k)>>
inline Eigen::MatrixXcd connection_matrix(const std::vector<SmoothBlockTrack>& tracks, std::size_t k,
                                          bool central = false) {
    detail::require_degenerate_set(tracks, "connection_matrix");
    const std::size_t N = tracks[0].intervals();
    if (k > N) throw dimension_error("connection_matrix: grid index out of range");
    const double ds = 1.0 / double(N);
    const bool closed = tracks[0].closed;
    if (closed && k == N) k = 0;
    const Eigen::MatrixXcd E = detail::stack_left(tracks, k);
    if (central && (closed || (k > 0 && k < N))) {
        const std::size_t kp = closed ? (k + 1) % N : k + 1;
        const std::size_t km = closed ? (k + N - 1) % N : k - 1;
        return E * (detail::stack_right(tracks, kp) - detail::stack_right(tracks, km)) / (2.0 * ds);
    }
    if (k == N) return E * (detail::stack_right(tracks, N) - detail::stack_right(tracks, N - 1)) / ds;
    return E * (detail::stack_right(tracks, k + 1) - detail::stack_right(tracks, k)) / ds;
}

// Path-ordered product of transfer matrices <<E(s_{k+1})|D(s_k)>>, later steps
// on the left. For G = 1 the single eigenvalue is exp(i gamma).
inline HolonomyMatrix wilson_loop(const std::vector<SmoothBlockTrack>& tracks,
                                  PhaseScheme scheme = PhaseScheme::extrapolated) {
    detail::require_degenerate_set(tracks, "wilson_loop");
    for (const auto& t : tracks) detail::require_loop_track(t, "wilson_loop");
    const std::size_t N = tracks[0].intervals();
    scheme = detail::effective_scheme(scheme, N);
    const bool sym = scheme != PhaseScheme::product;

    Eigen::MatrixXcd U = detail::stride_wilson(tracks, 1, sym);
    if (scheme == PhaseScheme::extrapolated) {
        const Eigen::MatrixXcd U2 = detail::stride_wilson(tracks, 2, true);
        const Eigen::MatrixXcd U4 = detail::stride_wilson(tracks, 4, true);
        U = (64.0 * U - 20.0 * U2 + U4) / 45.0;
    }
    HolonomyMatrix h;
    h.eigenvalue = tracks[0].eigenvalue[0];
    h.degeneracy = int(tracks.size());
    h.wilson = U;
    h.eigenvalues = detail::sorted_eigenvalues(U);
    h.n_grid = N;
    h.scheme = scheme;
    return h;
}

// Right vectors D'^(a) = sum_d Omega_ad D^(d), left vectors with Omega^{-1}.
// omega(k) is evaluated at every grid point k = 0..N.
inline std::vector<SmoothBlockTrack> gauge_transform(std::vector<SmoothBlockTrack> tracks,
                                                     const std::function<Eigen::MatrixXcd(std::size_t)>& omega) {
    if (tracks.empty()) return tracks;
    const std::size_t npts = tracks[0].s.size();
    const Eigen::Index G = Eigen::Index(tracks.size());
    const int len = tracks[0].chain_length;
    if (G > 1 && len != 1) throw degeneracy_error("gauge_transform: matrix gauges need one-dimensional blocks");

    std::vector<Eigen::MatrixXcd> om(npts);
    for (std::size_t k = 0; k < npts; ++k) {
        om[k] = omega(k);
        if (om[k].rows() != G || om[k].cols() != G)
            throw dimension_error("gauge_transform: gauge matrix has the wrong size");
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(om[k]);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(om[k]);
        const auto& sv = svd.singularValues();
        if (!lu.isInvertible() || sv(G - 1) <= 1e-12 * sv(0))
            throw singular_gauge_error("gauge_transform: singular gauge at grid index " + std::to_string(k));
    }
    if (tracks[0].closed) {
        const double scale = std::max(1.0, detail::max_abs(om[0]));
        if (detail::max_abs(om[npts - 1] - om[0]) > 1e-12 * scale)
            throw singular_gauge_error("gauge_transform: gauge is not periodic on a closed path");
    }
    for (std::size_t k = 0; k < npts; ++k) {
        const Eigen::MatrixXcd Ot = om[k].transpose();
        const Eigen::MatrixXcd Oti = Ot.inverse();
        if (len > 1) {
            tracks[0].right[k] *= Ot(0, 0);
            tracks[0].left[k] *= Oti(0, 0);
            continue;
        }
        const Eigen::MatrixXcd R = detail::stack_right(tracks, k) * Ot;
        const Eigen::MatrixXcd E = Oti * detail::stack_left(tracks, k);
        for (Eigen::Index i = 0; i < G; ++i) {
            tracks[std::size_t(i)].right[k] = R.col(i);
            tracks[std::size_t(i)].left[k] = E.row(i);
        }
    }
    return tracks;
}

struct ClosedLimitResult {
    std::vector<double> energies; // at s_0, ascending
    std::vector<double> phases;   // Berry phase per level, unwrapped
    Eigen::MatrixXd differences;  // gamma_m - gamma_n
    std::size_t n_grid{0};
};

using HamiltonianFamily = std::function<Eigen::MatrixXcd(const Eigen::VectorXd&)>;

// Standard Berry phases gamma_m = i loop<psi_m|d psi_m> of the levels of a
// Hamiltonian family, computed with the same overlap scheme as abelian_phase.
inline ClosedLimitResult closed_limit_phase(const HamiltonianFamily& hamiltonian, const ParameterPath& path,
                                            PhaseScheme scheme = PhaseScheme::extrapolated) {
    path.validate();
    if (!path.closed) throw path_error("closed_limit_phase: path must be closed");
    const std::size_t N = path.intervals;
    std::vector<Eigen::MatrixXcd> vecs(N + 1);
    std::vector<Eigen::VectorXd> vals(N + 1);
    for (std::size_t k = 0; k < N; ++k) {
        const Eigen::MatrixXcd H = hamiltonian(path.at(path.s(k)));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
        vals[k] = es.eigenvalues();
        vecs[k] = es.eigenvectors();
        const double scale = std::max(1.0, vals[k].cwiseAbs().maxCoeff());
        for (Eigen::Index i = 1; i < vals[k].size(); ++i)
            if (vals[k](i) - vals[k](i - 1) <= 1e-10 * scale)
                throw degeneracy_error("closed_limit_phase: Hamiltonian is degenerate at s = " +
                                       std::to_string(path.s(k)));
    }
    vecs[N] = vecs[0];
    vals[N] = vals[0];

    const Eigen::Index D = vals[0].size();
    ClosedLimitResult res;
    res.n_grid = N;
    res.energies.assign(vals[0].data(), vals[0].data() + D);
    for (Eigen::Index m = 0; m < D; ++m) {
        std::vector<Eigen::MatrixXcd> R(N + 1), E(N + 1);
        for (std::size_t k = 0; k <= N; ++k) {
            R[k] = vecs[k].col(m);
            E[k] = vecs[k].col(m).adjoint();
        }
        detail::align_group(R, E, 1, true, 0.5);
        SmoothBlockTrack t;
        t.label = int(m);
        t.closed = true;
        t.s = path.grid();
        t.eigenvalue.assign(N + 1, cplx(vals[0](m)));
        t.right = std::move(R);
        t.left = std::move(E);
        res.phases.push_back(abelian_phase(t, scheme).gamma.real());
    }
    res.differences.resize(D, D);
    for (Eigen::Index m = 0; m < D; ++m)
        for (Eigen::Index n = 0; n < D; ++n)
            res.differences(m, n) = res.phases[std::size_t(m)] - res.phases[std::size_t(n)];
    return res;
}

} // namespace holoq
