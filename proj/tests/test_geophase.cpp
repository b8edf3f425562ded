#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include <holoq/geophase.hpp>
#include <holoq/models.hpp>

using namespace holoq;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<SmoothBlockTrack> spin_tracks(Channel ch, double beta, double theta, std::size_t N) {
    SpinHalfModel m;
    m.channel = ch;
    m.beta = beta;
    m.theta = theta;
    return track_blocks(sample_family(m.path(N), m));
}

SmoothBlockTrack coherence(const std::vector<SmoothBlockTrack>& tracks) {
    return *std::max_element(tracks.begin(), tracks.end(), [](const auto& a, const auto& b) {
        return a.eigenvalue[0].imag() < b.eigenvalue[0].imag();
    });
}

std::vector<SmoothBlockTrack> degenerate_set(const DegenerateModel& m, const ParameterPath& p) {
    const auto tracks = track_blocks(sample_family(p, m));
    for (const auto& t : tracks)
        if (t.degeneracy == m.G && t.eigenvalue[0].imag() > 0.5) return group_members(tracks, t.group);
    ADD_FAILURE() << "no degenerate +i set found";
    return {};
}

// largest distance between two eigenvalue multisets after greedy matching
double multiset_distance(const Eigen::VectorXcd& a, std::vector<cplx> b) {
    if (std::size_t(a.size()) != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        auto it = std::min_element(b.begin(), b.end(),
                                   [&](cplx x, cplx y) { return std::abs(x - a(i)) < std::abs(y - a(i)); });
        worst = std::max(worst, std::abs(*it - a(i)));
        b.erase(it);
    }
    return worst;
}

std::vector<cplx> eigen_list(const Eigen::MatrixXcd& U) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(U, false);
    return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

// transported frame: dV/ds = -A(s) V, classic RK4
Eigen::MatrixXd transport_oracle(const DegenerateModel& m, int steps) {
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(m.G, m.G);
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        const double s = i * h;
        const Eigen::MatrixXd A0 = m.connection(s), Am = m.connection(s + 0.5 * h), A1 = m.connection(s + h);
        const Eigen::MatrixXd k1 = -A0 * V;
        const Eigen::MatrixXd k2 = -Am * (V + 0.5 * h * k1);
        const Eigen::MatrixXd k3 = -Am * (V + 0.5 * h * k2);
        const Eigen::MatrixXd k4 = -A1 * (V + h * k3);
        V += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return V;
}

} // namespace

TEST(Angles, WrapAndReportingRepresentative) {
    EXPECT_NEAR(wrap_pi(3.0 * pi / 2.0), -pi / 2.0, 1e-15);
    EXPECT_NEAR(wrap_pi(-pi), pi, 1e-15);
    EXPECT_NEAR(mod_2pi(pi), -pi, 1e-15);
    EXPECT_NEAR(mod_2pi(pi + 1e-12), -pi + 1e-12, 1e-15);
    EXPECT_NEAR(mod_2pi(-pi - 1e-12), -pi - 1e-12, 1e-15);
    EXPECT_NEAR(mod_2pi(7.0), 7.0 - 2.0 * pi, 1e-15);
    EXPECT_NEAR(angle_distance(pi - 1e-3, -pi + 1e-3), 2e-3, 1e-12);
}

TEST(ClosedLimit, LevelPhasesMatchContinuumSpinors) {
    // i loop <psi|d psi> for the aligned spinor (cos t/2, e^{i phi} sin t/2) is -pi (1 - cos t)
    for (double theta : {pi / 6, pi / 4, pi / 3, pi / 2}) {
        SpinHalfModel m;
        m.theta = theta;
        const auto res = closed_limit_phase([&m](const Eigen::VectorXd& b) { return m.hamiltonian(b); }, m.path(1024));
        ASSERT_EQ(res.phases.size(), 2u);
        EXPECT_LT(res.energies[0], res.energies[1]);
        EXPECT_NEAR(res.energies[0], -0.5, 1e-12);
        const double half_solid = pi * (1.0 - std::cos(theta));
        EXPECT_LE(angle_distance(res.phases[0], -half_solid), 1e-6) << theta;
        EXPECT_LE(angle_distance(res.phases[1], half_solid), 1e-6) << theta;
        EXPECT_NEAR(res.differences(0, 1), res.phases[0] - res.phases[1], 1e-14);
    }
}

TEST(ClosedLimit, DegenerateHamiltonianRejected) {
    const auto p = field_path(1.0, pi / 3, 32);
    EXPECT_THROW(closed_limit_phase([](const Eigen::VectorXd&) { return Eigen::MatrixXcd::Identity(2, 2).eval(); }, p),
                 degeneracy_error);
}

TEST(AbelianPhase, CoherenceBlockIsLevelDifference) {
    for (double theta : {pi / 4, 2.0}) {
        const auto& t = coherence(spin_tracks(Channel::none, 0.0, theta, 1024));
        const auto ph = abelian_phase(t);
        EXPECT_LE(angle_distance(ph.gamma.real(), -2.0 * pi * (1.0 - std::cos(theta))), 1e-8);
        EXPECT_NEAR(ph.gamma.imag(), 0.0, 1e-10);
        EXPECT_EQ(ph.scheme, PhaseScheme::extrapolated);
        EXPECT_EQ(ph.n_grid, 1024u);
    }
}

TEST(AbelianPhase, InvariantUnderPointwiseRescaling) {
    const auto tracks = spin_tracks(Channel::bit_flip, 0.2, pi / 3, 512);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const auto& t : tracks) {
        if (t.degeneracy != 1) continue;
        const auto ref = abelian_phase(t);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<cplx> w(513);
            for (auto& x : w) x = std::polar(std::exp(U(rng)), pi * U(rng));
            w[512] = w[0];
            const auto g = gauge_transform({t}, [&](std::size_t k) { return Eigen::MatrixXcd::Constant(1, 1, w[k]); });
            const auto ph = abelian_phase(g[0]);
            EXPECT_LE(angle_distance(ph.gamma.real(), ref.gamma.real()), 1e-8);
            EXPECT_NEAR(ph.gamma.imag(), ref.gamma.imag(), 1e-8);
        }
    }
}

TEST(AbelianPhase, ReversedLoopNegatesPhase) {
    for (Channel ch : {Channel::dephasing, Channel::bit_flip}) {
        SpinHalfModel m;
        m.channel = ch;
        m.beta = 0.2;
        const auto fwd = m.path(1024);
        const auto rev = make_path([fwd](double s) { return fwd.at(1.0 - s); }, 1024);
        const auto a = abelian_phase(coherence(track_blocks(sample_family(fwd, m))));
        const auto b = abelian_phase(coherence(track_blocks(sample_family(rev, m))));
        EXPECT_LE(angle_distance(a.gamma.real(), -b.gamma.real()), 1e-8);
        EXPECT_NEAR(a.gamma.imag(), -b.gamma.imag(), 1e-8);
    }
}

TEST(AbelianPhase, ReparametrizationInvariance) {
    SpinHalfModel m;
    m.channel = Channel::bit_flip;
    m.beta = 0.15;
    const auto base = m.path(1024);
    const auto ref = abelian_phase(coherence(track_blocks(sample_family(base, m))));
    const auto smooth = make_path(
        [base](double s) { return base.at(s + 0.12 * std::sin(2.0 * pi * s)); }, 1024);
    const auto squared = make_path([base](double s) { return base.at(s * s); }, 1024);
    const auto a = abelian_phase(coherence(track_blocks(sample_family(smooth, m))));
    const auto b = abelian_phase(coherence(track_blocks(sample_family(squared, m))));
    EXPECT_LE(angle_distance(a.gamma.real(), ref.gamma.real()), 1e-8);
    EXPECT_LE(angle_distance(b.gamma.real(), ref.gamma.real()), 1e-6);
}

TEST(AbelianPhase, GridConvergenceAndSchemes) {
    const auto& t512 = coherence(spin_tracks(Channel::bit_flip, 0.25, pi / 3, 512));
    const auto& t1024 = coherence(spin_tracks(Channel::bit_flip, 0.25, pi / 3, 1024));
    const double e = abelian_phase(t1024).gamma.real();
    EXPECT_LE(angle_distance(abelian_phase(t512).gamma.real(), e), 1e-8);
    const double sym = abelian_phase(t1024, PhaseScheme::symmetric).gamma.real();
    const double prod = abelian_phase(t1024, PhaseScheme::product).gamma.real();
    EXPECT_LE(angle_distance(sym, e), 1e-4);
    EXPECT_LE(angle_distance(prod, e), 1e-2);
    // second order: halving the step cuts the symmetric error by about four
    const double sym512 = abelian_phase(t512, PhaseScheme::symmetric).gamma.real();
    const double ratio = angle_distance(sym512, e) / angle_distance(sym, e);
    EXPECT_GT(ratio, 3.0);
    EXPECT_LT(ratio, 5.0);
    const auto& odd = coherence(spin_tracks(Channel::dephasing, 0.1, pi / 3, 1026));
    EXPECT_EQ(abelian_phase(odd).scheme, PhaseScheme::symmetric);
}

TEST(AbelianPhase, CoarseGridRefused) {
    SpinHalfModel m;
    const auto fast = make_path(
        [](double s) {
            Eigen::VectorXd b(3);
            b << std::cos(14.0 * pi * s), std::sin(14.0 * pi * s), 0.3;
            return b;
        },
        16);
    try {
        abelian_phase(coherence(track_blocks(sample_family(fast, m))));
        FAIL() << "expected a resolution error";
    } catch (const resolution_error& e) {
        EXPECT_GT(e.suggested_n, 16u);
    }
}

TEST(AbelianPhase, MisuseErrors) {
    const auto tracks = spin_tracks(Channel::dephasing, 0.1, pi / 3, 64);
    for (const auto& t : tracks)
        if (t.degeneracy == 2) EXPECT_THROW(abelian_phase(t), degeneracy_error);
    SpinHalfModel m;
    const auto open = make_path([](double s) { return Eigen::Vector3d(1.0, s, 0.5).eval(); }, 32, false);
    const auto ot = track_blocks(sample_family(open, m));
    EXPECT_THROW(abelian_phase(ot[0]), path_error);
}

TEST(Wilson, SingleBlockIsExpIGamma) {
    const auto tracks = spin_tracks(Channel::bit_flip, 0.2, pi / 3, 1024);
    for (const auto& t : tracks) {
        if (t.degeneracy != 1) continue;
        const auto h = wilson_loop({t});
        EXPECT_LE(std::abs(h.wilson(0, 0) - std::exp(cplx(0, 1) * abelian_phase(t).gamma)), 1e-10);
    }
}

TEST(Wilson, TwoFoldHolonomyMatchesAnalyticRotation) {
    for (double theta : {pi / 4, pi / 3, 1.2}) {
        const auto m = synthetic_degenerate_model(2, theta);
        const auto set = degenerate_set(m, m.standard_loop(1024));
        ASSERT_EQ(set.size(), 2u);
        const auto h = wilson_loop(set);
        const double a = 2.0 * pi * std::cos(theta);
        EXPECT_LE(multiset_distance(h.eigenvalues, {std::polar(1.0, a), std::polar(1.0, -a)}), 1e-6) << theta;
    }
}

TEST(Wilson, ThreeFoldHolonomyMatchesTransportOde) {
    const auto m = synthetic_degenerate_model(3);
    const auto set = degenerate_set(m, m.standard_loop(1024));
    ASSERT_EQ(set.size(), 3u);
    const auto h = wilson_loop(set);
    const Eigen::MatrixXd V = transport_oracle(m, 20000);
    EXPECT_LE((V.transpose() * V - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(multiset_distance(h.eigenvalues, eigen_list(V.cast<cplx>())), 1e-6);
    // the holonomy is a rotation: one eigenvalue 1 and a nontrivial conjugate pair
    EXPECT_LE((h.eigenvalues.array() - 1.0).abs().minCoeff(), 1e-6);
    EXPECT_GT(std::abs(h.eigenvalues(0) - 1.0), 1e-2);
}

TEST(Wilson, TrivialLoopIsIdentity) {
    for (int G : {2, 3}) {
        const auto m = synthetic_degenerate_model(G);
        const auto set = degenerate_set(m, m.trivial_loop(64));
        const auto h = wilson_loop(set);
        EXPECT_LE((h.wilson - Eigen::MatrixXcd::Identity(G, G)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Wilson, MatrixGaugeCovariance) {
    const auto m = synthetic_degenerate_model(2, 1.1);
    const std::size_t N = 512;
    const auto set = degenerate_set(m, m.standard_loop(N));
    const auto h = wilson_loop(set);
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g;
    auto rnd = [&](double sc) {
        Eigen::MatrixXcd x(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) x(i, j) = sc * cplx(g(rng), g(rng));
        return x;
    };
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::MatrixXcd X0 = rnd(0.6), X1 = rnd(0.4), X2 = rnd(0.4);
        auto omega = [&](std::size_t k) {
            const double s = double(k % N) / double(N);
            return Eigen::MatrixXcd((X0 + X1 * std::cos(2 * pi * s) + X2 * std::sin(2 * pi * s)).exp());
        };
        const auto gauged = gauge_transform(set, omega);
        for (std::size_t k = 0; k <= N; k += 37) {
            const Eigen::MatrixXcd B = detail::stack_left(gauged, k) * detail::stack_right(gauged, k);
            EXPECT_LE((B - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
        }
        const auto h2 = wilson_loop(gauged);
        EXPECT_LE(multiset_distance(h2.eigenvalues, eigen_list(h.wilson)), 1e-6);
        const Eigen::MatrixXcd Ot = omega(0).transpose();
        EXPECT_LE((h2.wilson - Ot.inverse() * h.wilson * Ot).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Wilson, GaugeErrors) {
    const auto m = synthetic_degenerate_model(2);
    const auto set = degenerate_set(m, m.standard_loop(64));
    EXPECT_THROW(gauge_transform(set, [](std::size_t) { return Eigen::MatrixXcd::Zero(2, 2).eval(); }),
                 singular_gauge_error);
    EXPECT_THROW(gauge_transform(set, [](std::size_t k) {
                     return Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(2, 2) * (1.0 + 0.01 * double(k)));
                 }),
                 singular_gauge_error);
    EXPECT_THROW(gauge_transform(set, [](std::size_t) { return Eigen::MatrixXcd::Identity(3, 3).eval(); }),
                 dimension_error);
    const auto tracks = spin_tracks(Channel::bit_flip, 0.2, pi / 3, 64);
    EXPECT_THROW(wilson_loop({tracks[0], tracks[1]}), not_degenerate_error);
}

TEST(Connection, TraceOfConnectionIntegratesToPhase) {
    // for a 1-D block: gamma = i * integral of A, compared with the overlap scheme
    const auto& t = coherence(spin_tracks(Channel::bit_flip, 0.1, pi / 3, 2048));
    cplx integral = 0.0;
    for (std::size_t k = 0; k < 2048; ++k) integral += connection_matrix({t}, k, true)(0, 0) / 2048.0;
    const auto ph = abelian_phase(t);
    EXPECT_LE(angle_distance((cplx(0, 1) * integral).real(), ph.gamma.real()), 1e-5);
    EXPECT_NEAR((cplx(0, 1) * integral).imag(), ph.gamma.imag(), 1e-5);
}
