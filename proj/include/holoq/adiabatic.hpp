// adiabatic.hpp: exact master-equation evolution and its adiabatic counterpart.
// Also holds the Jordan-chain ladder and the crossover-time estimate.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "holoq/errors.hpp"
#include "holoq/geophase.hpp"
#include "holoq/parallel.hpp"
#include "holoq/path.hpp"
#include "holoq/spectral.hpp"
#include "holoq/superop.hpp"

namespace holoq {

enum class EvolutionMethod { exact, adiabatic };

struct EvolutionResult {
    std::vector<double> s;
    std::vector<Eigen::VectorXcd> states; // coherence vectors at each s
    EvolutionMethod method{EvolutionMethod::exact};
    double T{0.0};
    double error_estimate{0.0}; // exact: step-halving estimate at s = 1
};

namespace detail {

// cheap upper bound of the spectral norm
inline double norm_bound(const Eigen::MatrixXcd& m) {
    const double n1 = m.cwiseAbs().colwise().sum().maxCoeff();
    const double ninf = m.cwiseAbs().rowwise().sum().maxCoeff();
    return std::sqrt(n1 * ninf);
}

template <class F>
std::vector<Eigen::VectorXcd> rk4_run(const F& model, const ParameterPath& path, double T,
                                      const Eigen::VectorXcd& y0, std::size_t n_steps) {
    const double h = 1.0 / double(n_steps);
    std::vector<Eigen::VectorXcd> ys(n_steps + 1);
    ys[0] = y0;
    Eigen::MatrixXcd L0 = evaluate_family(model, path, 0.0).matrix;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double s = double(k) * h;
        const double nb = norm_bound(L0);
        if (T * nb * h > 1.0) {
            double worst = nb;
            for (int j = 0; j <= 256; ++j)
                worst = std::max(worst, norm_bound(evaluate_family(model, path, double(j) / 256.0).matrix));
            const auto suggest = std::size_t(std::ceil(T * worst * 1.25)) + 1;
            throw stability_error("exact_evolve: step too large for T*||L|| = " + std::to_string(T * nb) +
                                      "; use at least " + std::to_string(suggest) + " steps",
                                  suggest);
        }
        const Eigen::MatrixXcd Lm = evaluate_family(model, path, s + 0.5 * h).matrix;
        const Eigen::MatrixXcd L1 = evaluate_family(model, path, double(k + 1) * h).matrix;
        const Eigen::VectorXcd& y = ys[k];
        const Eigen::VectorXcd k1 = T * (L0 * y);
        const Eigen::VectorXcd k2 = T * (Lm * (y + 0.5 * h * k1));
        const Eigen::VectorXcd k3 = T * (Lm * (y + 0.5 * h * k2));
        const Eigen::VectorXcd k4 = T * (L1 * (y + h * k3));
        ys[k + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        L0 = L1;
    }
    return ys;
}

// cumulative trapezoid on a uniform grid
template <class V>
std::vector<V> cumulative_trapezoid(const std::vector<V>& f, double h) {
    std::vector<V> out(f.size());
    if (f.empty()) return out;
    out[0] = f[0] * 0.0;
    for (std::size_t k = 1; k < f.size(); ++k) out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
    return out;
}

// second-order derivative on a uniform grid, one-sided at the ends
template <class V>
std::vector<V> gradient(const std::vector<V>& f, double h) {
    const std::size_t n = f.size();
    std::vector<V> d(n);
    if (n < 3) throw dimension_error("gradient: need at least three points");
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    return d;
}

} // namespace detail

// Classic RK4 on d rho/ds = T L(s) rho over s in [0, 1].
template <superoperator_family F>
EvolutionResult exact_evolve(const F& model, const ParameterPath& path, double T, const CoherenceVector& rho0,
                             std::size_t n_steps, bool estimate_error = true) {
    if (!(T > 0.0) || !std::isfinite(T)) throw error("exact_evolve: T must be positive");
    if (n_steps < 1) throw stability_error("exact_evolve: need at least one step", 1);
    EvolutionResult r;
    r.method = EvolutionMethod::exact;
    r.T = T;
    r.states = detail::rk4_run(model, path, T, rho0.coeffs, n_steps);
    r.s.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) r.s[k] = double(k) / double(n_steps);
    if (estimate_error && n_steps % 2 == 0 && n_steps >= 2) {
        try {
            const auto coarse = detail::rk4_run(model, path, T, rho0.coeffs, n_steps / 2);
            r.error_estimate = (coarse.back() - r.states.back()).norm() / 15.0;
        } catch (const stability_error&) {
            r.error_estimate = std::numeric_limits<double>::infinity();
        }
    }
    return r;
}

struct LadderResult {
    std::vector<double> s;
    std::vector<Eigen::VectorXcd> p; // chain amplitudes p^(0..n-1) at each grid point
};

// dp^(i)/ds = T p^(i+1) - sum_j <<E^(i)| dD^(j)/ds>> p^(j), RK4 on the track grid.
inline LadderResult ladder_integrate(const SmoothBlockTrack& track, double T, const Eigen::VectorXcd& p0) {
    const int n = track.chain_length;
    if (n < 2) throw degeneracy_error("ladder_integrate: block is one-dimensional; use the Abelian phase");
    if (p0.size() != n) throw dimension_error("ladder_integrate: initial amplitudes have the wrong length");
    if (!(T >= 0.0)) throw error("ladder_integrate: T must be nonnegative");
    const std::size_t N = track.intervals();
    if (N < 4) throw dimension_error("ladder_integrate: track needs at least four intervals");
    const double h = 1.0 / double(N);
    const bool closed = track.closed;

    auto R = [&](long k) -> const Eigen::MatrixXcd& {
        if (closed) return track.right[std::size_t(((k % long(N)) + long(N)) % long(N))];
        return track.right[std::size_t(std::clamp(k, 0L, long(N)))];
    };
    std::vector<Eigen::MatrixXcd> A(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
        Eigen::MatrixXcd dR;
        const long kk = long(k);
        // fourth order throughout to match RK4, skewed stencils at open ends
        const long n_ = long(N);
        if (closed || (kk >= 2 && kk + 2 <= n_)) {
            dR = (-R(kk + 2) + 8.0 * R(kk + 1) - 8.0 * R(kk - 1) + R(kk - 2)) / (12.0 * h);
        } else if (kk == 0) {
            dR = (-25.0 * R(0) + 48.0 * R(1) - 36.0 * R(2) + 16.0 * R(3) - 3.0 * R(4)) / (12.0 * h);
        } else if (kk == 1) {
            dR = (-3.0 * R(0) - 10.0 * R(1) + 18.0 * R(2) - 6.0 * R(3) + R(4)) / (12.0 * h);
        } else if (kk == n_) {
            dR = (25.0 * R(n_) - 48.0 * R(n_ - 1) + 36.0 * R(n_ - 2) - 16.0 * R(n_ - 3) + 3.0 * R(n_ - 4)) /
                 (12.0 * h);
        } else {
            dR = (3.0 * R(n_) + 10.0 * R(n_ - 1) - 18.0 * R(n_ - 2) + 6.0 * R(n_ - 3) - R(n_ - 4)) / (12.0 * h);
        }
        A[k] = track.left[k] * dR;
    }
    auto Aat = [&](long k) -> const Eigen::MatrixXcd& {
        if (closed) return A[std::size_t(((k % long(N)) + long(N)) % long(N))];
        return A[std::size_t(std::clamp(k, 0L, long(N)))];
    };

    Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) K(i, i + 1) = 1.0;

    LadderResult out;
    out.s = track.s;
    out.p.resize(N + 1);
    out.p[0] = p0;
    for (std::size_t k = 0; k < N; ++k) {
        const long kk = long(k);
        const Eigen::MatrixXcd M0 = T * K - A[k];
        const Eigen::MatrixXcd M1 = T * K - A[k + 1];
        Eigen::MatrixXcd Amid;
        if (closed || (k > 0 && k + 2 <= N))
            Amid = (-Aat(kk - 1) + 9.0 * Aat(kk) + 9.0 * Aat(kk + 1) - Aat(kk + 2)) / 16.0;
        else if (k == 0)
            Amid = (5.0 * A[0] + 15.0 * A[1] - 5.0 * A[2] + A[3]) / 16.0;
        else
            Amid = (A[N - 3] - 5.0 * A[N - 2] + 15.0 * A[N - 1] + 5.0 * A[N]) / 16.0;
        const Eigen::MatrixXcd Mm = T * K - Amid;
        const double nb = std::max({detail::norm_bound(M0), detail::norm_bound(Mm), detail::norm_bound(M1)});
        if (nb * h > 1.0) {
            const auto suggest = std::size_t(std::ceil(nb * 1.25)) + 1;
            throw stability_error("ladder_integrate: grid too coarse for T = " + std::to_string(T) +
                                      "; use at least " + std::to_string(suggest) + " intervals",
                                  suggest);
        }
        const Eigen::VectorXcd& y = out.p[k];
        const Eigen::VectorXcd k1 = M0 * y;
        const Eigen::VectorXcd k2 = Mm * (y + 0.5 * h * k1);
        const Eigen::VectorXcd k3 = Mm * (y + 0.5 * h * k2);
        const Eigen::VectorXcd k4 = M1 * (y + h * k3);
        out.p[k + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

struct AdiabaticOptions {
    std::optional<double> cluster_tol;
    PhaseScheme scheme{PhaseScheme::extrapolated};
    unsigned threads{1};
};

// Tracked blocks with their geometric amplitudes (no dynamical factor) and
// eigenvalue integrals Lambda(s) = int_0^s lambda.
struct AdiabaticSolution {
    std::vector<Superoperator> samples;
    std::vector<SmoothBlockTrack> tracks;
    std::vector<std::vector<Eigen::VectorXcd>> amplitudes; // [block][k], length chain_length
    std::vector<std::vector<cplx>> lambda_integral;        // [block][k]
};

namespace detail {

inline AdiabaticSolution solve_amplitudes(std::vector<Superoperator> samples, std::vector<SmoothBlockTrack> tracks,
                                          double T, const Eigen::VectorXcd& rho0, PhaseScheme scheme) {
    AdiabaticSolution sol;
    const std::size_t nb = tracks.size();
    const std::size_t N = tracks.empty() ? 0 : tracks[0].intervals();
    const double h = 1.0 / double(N);
    sol.amplitudes.assign(nb, std::vector<Eigen::VectorXcd>(N + 1));
    sol.lambda_integral.resize(nb);

    std::vector<bool> done(nb, false);
    for (std::size_t b = 0; b < nb; ++b) {
        if (done[b]) continue;
        const auto& t = tracks[b];
        sol.lambda_integral[b] = cumulative_trapezoid(t.eigenvalue, h);
        if (t.chain_length > 1) {
            const Eigen::VectorXcd p0 = t.left[0] * rho0;
            const auto lad = ladder_integrate(t, T, p0);
            sol.amplitudes[b] = lad.p;
            done[b] = true;
            continue;
        }
        if (t.degeneracy == 1) {
            const cplx p0 = (t.left[0] * rho0)(0, 0);
            const auto tf = transport_factors(t);
            for (std::size_t k = 0; k <= N; ++k) sol.amplitudes[b][k] = Eigen::VectorXcd::Constant(1, p0 * tf[k]);
            if (t.closed) {
                const cplx g = abelian_phase(t, scheme).gamma;
                sol.amplitudes[b][N](0) = p0 * std::exp(cplx(0.0, 1.0) * g);
            }
            done[b] = true;
            continue;
        }
        // degenerate set: transport the amplitude vector with the symmetric transfers
        std::vector<std::size_t> idx;
        for (std::size_t c = 0; c < nb; ++c)
            if (tracks[c].group == t.group) idx.push_back(c);
        std::vector<SmoothBlockTrack> members;
        for (auto c : idx) members.push_back(tracks[c]);
        Eigen::VectorXcd P = stack_left(members, 0) * rho0;
        std::vector<Eigen::VectorXcd> hist(N + 1);
        hist[0] = P;
        for (std::size_t k = 0; k < N; ++k) {
            const Eigen::MatrixXcd F = stack_left(members, k) * stack_right(members, k + 1);
            const Eigen::MatrixXcd Gm = stack_left(members, k + 1) * stack_right(members, k);
            hist[k + 1] = symmetric_transfer(F, Gm) * hist[k];
        }
        if (t.closed) hist[N] = wilson_loop(members, scheme).wilson * hist[0];
        for (std::size_t m = 0; m < idx.size(); ++m) {
            for (std::size_t k = 0; k <= N; ++k)
                sol.amplitudes[idx[m]][k] = Eigen::VectorXcd::Constant(1, hist[k](Eigen::Index(m)));
            sol.lambda_integral[idx[m]] = sol.lambda_integral[b];
            done[idx[m]] = true;
        }
    }
    sol.samples = std::move(samples);
    sol.tracks = std::move(tracks);
    return sol;
}

inline EvolutionResult assemble(const AdiabaticSolution& sol, double T) {
    EvolutionResult r;
    r.method = EvolutionMethod::adiabatic;
    r.T = T;
    r.s = sol.tracks[0].s;
    const std::size_t npts = r.s.size();
    const Eigen::Index n = sol.tracks[0].right[0].rows();
    r.states.assign(npts, Eigen::VectorXcd::Zero(n));
    for (std::size_t b = 0; b < sol.tracks.size(); ++b)
        for (std::size_t k = 0; k < npts; ++k) {
            const cplx dyn = std::exp(T * sol.lambda_integral[b][k]);
            r.states[k] += dyn * (sol.tracks[b].right[k] * sol.amplitudes[b][k]);
        }
    return r;
}

} // namespace detail

template <superoperator_family F>
AdiabaticSolution adiabatic_solution(const F& model, const ParameterPath& path, double T, const CoherenceVector& rho0,
                                     const AdiabaticOptions& opt = {}) {
    auto samples = sample_family(path, model, opt.threads);
    TrackOptions topt;
    topt.threads = opt.threads;
    auto tracks = track_blocks(samples, opt.cluster_tol, topt);
    if (tracks.empty() || tracks[0].right[0].rows() != rho0.coeffs.size())
        throw dimension_error("adiabatic_evolve: initial state does not match the model dimension");
    return detail::solve_amplitudes(std::move(samples), std::move(tracks), T, rho0.coeffs, opt.scheme);
}

// rho(s) = sum_beta sum_j p_beta^(j)(s) exp(T int_0^s lambda_beta) D_beta^(j)(s) on the path grid
template <superoperator_family F>
EvolutionResult adiabatic_evolve(const F& model, const ParameterPath& path, double T, const CoherenceVector& rho0,
                                 const AdiabaticOptions& opt = {}) {
    if (!(T > 0.0) || !std::isfinite(T)) throw error("adiabatic_evolve: T must be positive");
    return detail::assemble(adiabatic_solution(model, path, T, rho0, opt), T);
}

struct CrossoverReport {
    std::vector<double> T;
    std::vector<std::vector<double>> crossover; // [T index][block]
    std::vector<double> max_ratio;
    std::vector<int> block_labels;
    std::vector<cplx> block_eigenvalues; // at s_0
    std::size_t n_grid{0};
    double cluster_tol{0.0};
};

namespace detail {

// Per-block crossover times for a list of T values from a solved adiabatic
// problem. Degenerate sets report the 2-norm over their members.
inline std::vector<std::vector<double>> crossover_from_solution(const AdiabaticSolution& sol,
                                                                const std::vector<double>& Ts) {
    const auto& tracks0 = sol.tracks;
    const std::size_t nb = tracks0.size();
    for (const auto& t : tracks0)
        if (t.chain_length != 1)
            throw degeneracy_error("crossover_time: defined for one-dimensional Jordan blocks only");
    const std::size_t N = tracks0[0].intervals();
    const std::size_t npts = N + 1;
    const double h = 1.0 / double(N);

    // canonical gauge per degenerate set; geometric amplitudes follow the gauge change
    std::vector<SmoothBlockTrack> tracks = tracks0;
    std::vector<std::vector<Eigen::VectorXcd>> amp = sol.amplitudes;
    std::vector<int> groups;
    for (const auto& t : tracks0)
        if (std::find(groups.begin(), groups.end(), t.group) == groups.end()) groups.push_back(t.group);
    for (int g : groups) {
        std::vector<std::size_t> idx;
        std::vector<SmoothBlockTrack> members;
        for (std::size_t b = 0; b < nb; ++b)
            if (tracks0[b].group == g) {
                idx.push_back(b);
                members.push_back(tracks0[b]);
            }
        const auto canon = canonical_gauge(members);
        for (std::size_t k = 0; k < npts; ++k) {
            // p' = E' (sum p D)
            Eigen::VectorXcd w = Eigen::VectorXcd::Zero(members[0].right[k].rows());
            for (std::size_t m = 0; m < idx.size(); ++m) w += members[m].right[k] * amp[idx[m]][k];
            for (std::size_t m = 0; m < idx.size(); ++m) amp[idx[m]][k] = canon[m].left[k] * w;
        }
        for (std::size_t m = 0; m < idx.size(); ++m) tracks[idx[m]] = canon[m];
    }

    // dL/ds by central differences, periodic on closed paths
    const bool closed = tracks[0].closed;
    std::vector<Eigen::MatrixXcd> dL(npts);
    for (std::size_t k = 0; k < npts; ++k) {
        if (closed) {
            const std::size_t kk = k % N;
            dL[k] = (sol.samples[(kk + 1) % N].matrix - sol.samples[(kk + N - 1) % N].matrix) / (2.0 * h);
        } else if (k == 0) {
            dL[k] = (-3.0 * sol.samples[0].matrix + 4.0 * sol.samples[1].matrix - sol.samples[2].matrix) / (2.0 * h);
        } else if (k == N) {
            dL[k] = (3.0 * sol.samples[N].matrix - 4.0 * sol.samples[N - 1].matrix + sol.samples[N - 2].matrix) /
                    (2.0 * h);
        } else {
            dL[k] = (sol.samples[k + 1].matrix - sol.samples[k - 1].matrix) / (2.0 * h);
        }
    }

    // T-independent pieces per ordered pair (beta, alpha)
    struct pair_data {
        std::size_t beta;
        std::vector<cplx> Q, dQ, Om;
    };
    std::vector<std::vector<pair_data>> pairs(nb);
    for (std::size_t a = 0; a < nb; ++a)
        for (std::size_t b = 0; b < nb; ++b) {
            if (tracks[b].group == tracks[a].group) continue;
            pair_data pd;
            pd.beta = b;
            std::vector<cplx> omega(npts);
            pd.Q.resize(npts);
            for (std::size_t k = 0; k < npts; ++k) {
                omega[k] = tracks[b].eigenvalue[k] - tracks[a].eigenvalue[k];
                if (std::abs(omega[k]) < 1e-10)
                    throw gap_collapse_error("crossover_time: gap between blocks " + std::to_string(tracks[a].label) +
                                             " and " + std::to_string(tracks[b].label) +
                                             " vanishes at s = " + std::to_string(tracks[a].s[k]));
                const cplx V = amp[b][k](0) * (tracks[a].left[k] * dL[k] * tracks[b].right[k])(0, 0);
                pd.Q[k] = V / (omega[k] * omega[k]);
            }
            pd.Om = cumulative_trapezoid(omega, h);
            pd.dQ = gradient(pd.Q, h);
            pairs[a].push_back(std::move(pd));
        }

    std::vector<std::vector<double>> out(Ts.size(), std::vector<double>(nb, 0.0));
    for (std::size_t ti = 0; ti < Ts.size(); ++ti) {
        const double T = Ts[ti];
        std::vector<std::vector<cplx>> sum(nb, std::vector<cplx>(npts, 0.0));
        for (std::size_t a = 0; a < nb; ++a)
            for (const auto& pd : pairs[a]) {
                std::vector<cplx> integrand(npts);
                for (std::size_t k = 0; k < npts; ++k) integrand[k] = std::exp(T * pd.Om[k]) * pd.dQ[k];
                const auto I = cumulative_trapezoid(integrand, h);
                for (std::size_t k = 0; k < npts; ++k)
                    sum[a][k] += pd.Q[0] - pd.Q[k] * std::exp(T * pd.Om[k]) + I[k];
            }
        for (std::size_t a = 0; a < nb; ++a) {
            double best = 0.0;
            for (std::size_t k = 0; k < npts; ++k) {
                double v2 = 0.0;
                for (std::size_t b = 0; b < nb; ++b)
                    if (tracks[b].group == tracks[a].group) v2 += std::norm(sum[b][k]);
                best = std::max(best, std::sqrt(v2));
            }
            if (!std::isfinite(best))
                throw error("crossover_time: non-finite value at T = " + std::to_string(T) +
                            " (exponential growth overflowed)");
            out[ti][a] = best;
        }
    }
    return out;
}

} // namespace detail

inline std::vector<double> crossover_times(const AdiabaticSolution& sol, double T) {
    return detail::crossover_from_solution(sol, {T}).front();
}

template <superoperator_family F>
double crossover_time(const F& model, const ParameterPath& path, double T, int block, const CoherenceVector& rho0,
                      const AdiabaticOptions& opt = {}) {
    if (!(T > 0.0)) throw error("crossover_time: T must be positive");
    const auto sol = adiabatic_solution(model, path, T, rho0, opt);
    if (block < 0 || std::size_t(block) >= sol.tracks.size())
        throw dimension_error("crossover_time: block index out of range");
    return crossover_times(sol, T)[std::size_t(block)];
}

template <superoperator_family F>
CrossoverReport max_ratio_curve(const F& model, const ParameterPath& path, const std::vector<double>& T_grid,
                                const CoherenceVector& rho0, const AdiabaticOptions& opt = {}) {
    if (T_grid.empty()) throw error("max_ratio_curve: T grid is empty");
    for (double T : T_grid)
        if (!(T > 0.0) || !std::isfinite(T)) throw error("max_ratio_curve: T values must be positive");
    // amplitudes of one-dimensional blocks do not depend on T
    const auto sol = adiabatic_solution(model, path, T_grid.front(), rho0, opt);
    CrossoverReport rep;
    rep.T = T_grid;
    rep.crossover = detail::crossover_from_solution(sol, T_grid);
    rep.n_grid = path.intervals;
    rep.cluster_tol = sol.tracks[0].cluster_tol;
    for (const auto& t : sol.tracks) {
        rep.block_labels.push_back(t.label);
        rep.block_eigenvalues.push_back(t.eigenvalue[0]);
    }
    for (std::size_t i = 0; i < T_grid.size(); ++i)
        rep.max_ratio.push_back(*std::max_element(rep.crossover[i].begin(), rep.crossover[i].end()) / T_grid[i]);
    return rep;
}

} // namespace holoq
