#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include <holoq/adiabatic.hpp>
#include <holoq/models.hpp>

using namespace holoq;

namespace {

constexpr double pi = std::numbers::pi;

SpinHalfModel spin(Channel ch, double beta, double B = 1.0) {
    SpinHalfModel m;
    m.channel = ch;
    m.beta = beta;
    m.B = B;
    return m;
}

ParameterPath frozen(const SpinHalfModel& m, std::size_t n) {
    const Eigen::VectorXd b0 = m.path(n).at(0.0);
    return make_path([b0](double) { return b0; }, n);
}

// hand-built chain track: D(s) = exp(s X) D0, E(s) = E0 exp(-s X)
SmoothBlockTrack rotating_chain(const Eigen::MatrixXcd& X, const Eigen::MatrixXcd& D0, cplx lambda, std::size_t N) {
    SmoothBlockTrack t;
    t.chain_length = int(D0.cols());
    t.closed = false;
    const Eigen::MatrixXcd E0 = (D0.adjoint() * D0).inverse() * D0.adjoint();
    for (std::size_t k = 0; k <= N; ++k) {
        const double s = double(k) / double(N);
        t.s.push_back(s);
        t.eigenvalue.push_back(lambda);
        t.right.push_back((s * X).exp() * D0);
        t.left.push_back(E0 * (-s * X).exp());
    }
    return t;
}

} // namespace

TEST(ExactEvolve, StaticGeneratorMatchesMatrixExponential) {
    const auto m = spin(Channel::spontaneous_emission, 0.3);
    const auto p = frozen(m, 64);
    const auto rho0 = m.equal_superposition();
    const double T = 10.0;
    const auto r = exact_evolve(m, p, T, rho0, 2000);
    const Eigen::VectorXcd oracle = (T * m(p.at(0.0)).matrix).exp() * rho0.coeffs;
    EXPECT_LE((r.states.back() - oracle).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(r.error_estimate, 1e-9);
    EXPECT_EQ(r.states.size(), 2001u);
    EXPECT_EQ(r.method, EvolutionMethod::exact);
}

TEST(ExactEvolve, UnitaryAndTracePreserving) {
    const auto closed = spin(Channel::none, 0.0);
    const auto rho0 = closed.equal_superposition();
    const auto r = exact_evolve(closed, closed.path(64), 20.0, rho0, 4000);
    for (const auto& v : r.states) {
        EXPECT_NEAR(v.norm(), rho0.coeffs.norm(), 1e-8);
        EXPECT_NEAR(v(0).real(), 1.0 / std::sqrt(2.0), 1e-12);
    }
    const auto open = spin(Channel::bit_flip, 0.3);
    const auto r2 = exact_evolve(open, open.path(64), 20.0, rho0, 4000);
    for (const auto& v : r2.states) {
        EXPECT_NEAR(v(0).real(), 1.0 / std::sqrt(2.0), 1e-12);
        EXPECT_LE(v.norm(), 1.0 + 1e-10);
    }
}

TEST(ExactEvolve, RefusesUnstableStep) {
    const auto m = spin(Channel::dephasing, 0.1);
    try {
        exact_evolve(m, m.path(64), 1000.0, m.equal_superposition(), 10);
        FAIL() << "expected a stability error";
    } catch (const stability_error& e) {
        EXPECT_GT(e.suggested_steps, 500u);
        EXPECT_NO_THROW(exact_evolve(m, m.path(64), 1000.0, m.equal_superposition(), e.suggested_steps, false));
    }
    EXPECT_THROW(exact_evolve(m, m.path(64), -1.0, m.equal_superposition(), 10), error);
}

TEST(AdiabaticEvolve, StaticGeneratorIsExact) {
    for (Channel ch : {Channel::dephasing, Channel::spontaneous_emission, Channel::bit_flip}) {
        const auto m = spin(ch, 0.2);
        const auto p = frozen(m, 64);
        const auto rho0 = m.equal_superposition();
        const double T = 7.0;
        const auto r = adiabatic_evolve(m, p, T, rho0);
        EXPECT_EQ(r.method, EvolutionMethod::adiabatic);
        for (std::size_t k = 0; k <= 64; k += 16) {
            const Eigen::VectorXcd oracle = (r.s[k] * T * m(p.at(0.0)).matrix).exp() * rho0.coeffs;
            EXPECT_LE((r.states[k] - oracle).cwiseAbs().maxCoeff(), 1e-10) << to_string(ch);
        }
    }
}

TEST(AdiabaticEvolve, ApproachesExactWithGrowingT) {
    const auto m = spin(Channel::dephasing, 0.1);
    const auto p = m.path(1024);
    const auto rho0 = m.equal_superposition();
    std::vector<double> err;
    for (double T : {5.0, 20.0, 40.0}) {
        const auto a = adiabatic_evolve(m, p, T, rho0);
        const auto e = exact_evolve(m, p, T, rho0, std::size_t(100 * T));
        EXPECT_LE(e.error_estimate, 1e-8);
        EXPECT_NEAR(a.states.back()(0).real(), 1.0 / std::sqrt(2.0), 1e-12);
        err.push_back((a.states.back() - e.states.back()).norm());
    }
    EXPECT_GT(err[0], err[1]);
    EXPECT_GT(err[1], err[2]);
}

TEST(Ladder, StaticChainIsPolynomial) {
    Eigen::MatrixXcd D0 = Eigen::MatrixXcd::Zero(3, 2);
    D0(0, 0) = 1.0;
    D0(1, 1) = 1.0;
    const auto t = rotating_chain(Eigen::MatrixXcd::Zero(3, 3), D0, cplx(-0.1, 0.0), 64);
    Eigen::VectorXcd p0(2);
    p0 << 0.3, cplx(0.2, -0.1);
    const auto r = ladder_integrate(t, 12.0, p0);
    EXPECT_LE(std::abs(r.p.back()(0) - (p0(0) + 12.0 * p0(1))), 1e-12);
    EXPECT_LE(std::abs(r.p.back()(1) - p0(1)), 1e-12);
}

TEST(Ladder, RotatingChainMatchesExponential) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd Y(4, 4), D0(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) Y(i, j) = cplx(g(rng), g(rng));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) D0(i, j) = cplx(g(rng), g(rng));
    const Eigen::MatrixXcd X = 0.5 * (Y - Y.adjoint());
    const std::size_t N = 1024;
    const auto t = rotating_chain(X, D0, cplx(-0.05, 0.3), N);
    Eigen::VectorXcd p0(3);
    p0 << 1.0, cplx(0.0, 0.5), -0.25;
    const double T = 3.0;
    const auto r = ladder_integrate(t, T, p0);
    // A = E dD/ds = E0 X D0 is constant here
    const Eigen::MatrixXcd E0 = t.left[0];
    Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(3, 3);
    K(0, 1) = K(1, 2) = 1.0;
    const Eigen::MatrixXcd M = T * K - E0 * X * D0;
    for (std::size_t k = 0; k <= N; k += 256)
        EXPECT_LE((r.p[k] - (r.s[k] * M).exp() * p0).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ladder, Errors) {
    Eigen::MatrixXcd D0 = Eigen::MatrixXcd::Identity(3, 1);
    const auto one = rotating_chain(Eigen::MatrixXcd::Zero(3, 3), D0, 0.0, 32);
    EXPECT_THROW(ladder_integrate(one, 1.0, Eigen::VectorXcd::Ones(1)), degeneracy_error);
    const auto two = rotating_chain(Eigen::MatrixXcd::Zero(3, 3), Eigen::MatrixXcd::Identity(3, 2), 0.0, 32);
    EXPECT_THROW(ladder_integrate(two, 1.0, Eigen::VectorXcd::Ones(3)), dimension_error);
    EXPECT_THROW(ladder_integrate(two, 1e4, Eigen::VectorXcd::Ones(2)), stability_error);
}

TEST(Crossover, StaticModelIsZero) {
    const auto m = spin(Channel::dephasing, 0.1);
    const auto rep = max_ratio_curve(m, frozen(m, 128), {10.0}, m.equal_superposition());
    ASSERT_EQ(rep.max_ratio.size(), 1u);
    EXPECT_EQ(rep.max_ratio[0], 0.0);
    for (double tc : rep.crossover[0]) EXPECT_EQ(tc, 0.0);
}

TEST(Crossover, ClosedSystemIsBoundedAndFinite) {
    const auto m = spin(Channel::none, 0.0);
    std::vector<double> Ts{5, 10, 20, 40, 80};
    const auto rep = max_ratio_curve(m, m.path(1024), Ts, m.equal_superposition());
    for (std::size_t i = 0; i < Ts.size(); ++i) {
        for (double tc : rep.crossover[i]) {
            EXPECT_TRUE(std::isfinite(tc));
            EXPECT_GE(tc, 0.0);
        }
        // without decay the accumulated coupling stays bounded, so the ratio falls like 1/T
        EXPECT_LE(rep.max_ratio[i] * Ts[i], 2.0 * rep.max_ratio[0] * Ts[0] + 1e-12);
    }
    EXPECT_LT(rep.max_ratio.back(), rep.max_ratio.front());
}

TEST(Crossover, GaugeInvariant) {
    const auto m = spin(Channel::bit_flip, 0.2);
    const auto rho0 = m.equal_superposition();
    const std::size_t N = 512;
    const auto sol = adiabatic_solution(m, m.path(N), 10.0, rho0);
    const auto ref = crossover_times(sol, 10.0);
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        AdiabaticSolution s2 = sol;
        for (std::size_t b = 0; b < sol.tracks.size(); ++b) {
            const double a = 0.4 * U(rng), c = U(rng), w0 = std::round(2.0 * U(rng));
            const auto g = gauge_transform({sol.tracks[b]}, [&](std::size_t k) {
                const double s = double(k % N) / double(N);
                return Eigen::MatrixXcd::Constant(
                    1, 1, std::polar(std::exp(a * std::sin(2 * pi * s)), 2 * pi * (w0 * s + c * std::cos(2 * pi * s))));
            });
            s2.tracks[b] = g[0];
            for (std::size_t k = 0; k <= N; ++k)
                s2.amplitudes[b][k] = g[0].left[k] * (sol.tracks[b].right[k] * sol.amplitudes[b][k]);
        }
        const auto got = crossover_times(s2, 10.0);
        for (std::size_t b = 0; b < ref.size(); ++b) EXPECT_NEAR(got[b], ref[b], 1e-8 * std::max(1.0, ref[b]));
    }
}

TEST(Crossover, SingleBlockQueryAndErrors) {
    const auto m = spin(Channel::dephasing, 0.1);
    const auto rho0 = m.equal_superposition();
    const auto rep = max_ratio_curve(m, m.path(256), {20.0}, rho0);
    const double tc = crossover_time(m, m.path(256), 20.0, 2, rho0);
    EXPECT_NEAR(tc, rep.crossover[0][2], 1e-12);
    EXPECT_THROW(crossover_time(m, m.path(256), 20.0, 9, rho0), dimension_error);
    EXPECT_THROW(max_ratio_curve(m, m.path(256), {}, rho0), error);
    EXPECT_THROW(max_ratio_curve(m, m.path(256), {-1.0}, rho0), error);
    const auto cm = synthetic_jordan_chain_model();
    CoherenceVector r0{2, Eigen::VectorXcd::Ones(4)};
    AdiabaticOptions opt;
    opt.cluster_tol = 1e-6;
    EXPECT_THROW(max_ratio_curve(cm, cm.loop(256), {10.0}, r0, opt), degeneracy_error);
}
