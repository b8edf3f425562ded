// models.hpp: spin-1/2 in a rotating field with eigenbasis decoherence channels,
// plus two synthetic families used to exercise holonomies and Jordan chains

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "holoq/errors.hpp"
#include "holoq/path.hpp"
#include "holoq/spectral.hpp"
#include "holoq/superop.hpp"

namespace holoq {

enum class Channel { none, dephasing, spontaneous_emission, bit_flip };

inline const char* to_string(Channel c) {
    switch (c) {
    case Channel::none: return "none";
    case Channel::dephasing: return "dephasing";
    case Channel::spontaneous_emission: return "spontaneous_emission";
    case Channel::bit_flip: return "bit_flip";
    }
    return "?";
}

inline Channel channel_from_string(const std::string& s) {
    if (s == "none") return Channel::none;
    if (s == "dephasing") return Channel::dephasing;
    if (s == "spontaneous_emission") return Channel::spontaneous_emission;
    if (s == "bit_flip") return Channel::bit_flip;
    throw model_error("unknown channel '" + s + "'");
}

namespace pauli {
inline Eigen::Matrix2cd x() { return (Eigen::Matrix2cd() << 0, 1, 1, 0).finished(); }
inline Eigen::Matrix2cd y() {
    const cplx I(0.0, 1.0);
    return (Eigen::Matrix2cd() << 0, -I, I, 0).finished();
}
inline Eigen::Matrix2cd z() { return (Eigen::Matrix2cd() << 1, 0, 0, -1).finished(); }
// lowering operator with the factor 2 convention: sigma_- |1> = 2 |0>
inline Eigen::Matrix2cd minus() { return (Eigen::Matrix2cd() << 0, 2, 0, 0).finished(); }
} // namespace pauli

inline ParameterPath field_path(double B, double theta, std::size_t n = 1024) {
    if (!(B > 0.0) || !std::isfinite(B)) throw path_error("field_path: B must be positive");
    if (!(theta > 0.0 && theta < std::numbers::pi))
        throw path_error("field_path: theta must lie strictly between 0 and pi (the cone degenerates otherwise)");
    const double st = std::sin(theta), ct = std::cos(theta);
    return make_path(
        [B, st, ct](double s) {
            const double phi = 2.0 * std::numbers::pi * s;
            Eigen::VectorXd r(3);
            r << B * std::cos(phi) * st, B * std::sin(phi) * st, B * ct;
            return r;
        },
        n, true);
}

struct SpinHalfModel {
    double B{1.0};
    double theta{std::numbers::pi / 3.0};
    Channel channel{Channel::none};
    double beta{0.0};
    double mu{1.0};
    std::shared_ptr<const OperatorBasis> basis{std::make_shared<OperatorBasis>(make_basis(2))};

    // H = -mu S.B with S = sigma/2
    Eigen::MatrixXcd hamiltonian(const Eigen::VectorXd& b) const {
        if (b.size() != 3) throw dimension_error("SpinHalfModel: field vector must have 3 components");
        return -0.5 * mu * (b(0) * pauli::x() + b(1) * pauli::y() + b(2) * pauli::z());
    }

    // Columns: ground (E_-) then excited (E_+); each column's largest entry real positive.
    Eigen::MatrixXcd eigenbasis(const Eigen::VectorXd& b) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hamiltonian(b));
        Eigen::MatrixXcd W = es.eigenvectors();
        for (Eigen::Index c = 0; c < W.cols(); ++c) W.col(c) *= detail::phase_convention(W.col(c));
        return W;
    }

    std::vector<Eigen::MatrixXcd> lindblad_ops(const Eigen::VectorXd& b) const {
        if (beta < 0.0) throw model_error("SpinHalfModel: channel strength must be nonnegative");
        if (channel == Channel::none) return {};
        const Eigen::MatrixXcd W = eigenbasis(b);
        Eigen::Matrix2cd s;
        switch (channel) {
        case Channel::dephasing: s = pauli::z(); break;
        case Channel::spontaneous_emission: s = pauli::minus(); break;
        case Channel::bit_flip: s = pauli::x(); break;
        default: return {};
        }
        return {beta * W * s * W.adjoint()};
    }

    Superoperator operator()(const Eigen::VectorXd& b) const {
        return total_superop(hamiltonian(b), lindblad_ops(b), *basis);
    }

    ParameterPath path(std::size_t n = 1024) const { return field_path(B, theta, n); }

    // (|psi_0> + |psi_1>)/sqrt 2 in the s = 0 eigenbasis, as a coherence vector
    CoherenceVector equal_superposition() const {
        const Eigen::MatrixXcd W = eigenbasis(path(min_path_intervals).at(0.0));
        const Eigen::VectorXcd psi = (W.col(0) + W.col(1)) / std::sqrt(2.0);
        return vectorize(psi * psi.adjoint(), *basis);
    }
};

inline std::vector<Eigen::MatrixXcd> lindblad_ops(const SpinHalfModel& model, const Eigen::VectorXd& b) {
    return model.lindblad_ops(b);
}

// Closed family H(n) = n n^T on R^{G+1}: the zero level is G-fold degenerate and
// the superoperator eigenvalue +i belongs to the G operators |a_j><n| with a_j
// spanning the plane orthogonal to n. Its holonomy is the parallel transport of
// that plane along the loop traced by n.
struct DegenerateModel {
    int G{2};
    double theta{std::numbers::pi / 3.0};
    double wobble{0.6}; // extra out-of-plane motion for G = 3
    std::shared_ptr<const OperatorBasis> basis;

    int hilbert_dimension() const { return G + 1; }

    Eigen::MatrixXcd hamiltonian(const Eigen::VectorXd& n) const {
        if (n.size() != G + 1) throw dimension_error("DegenerateModel: parameter has the wrong length");
        const Eigen::VectorXd u = n.normalized();
        return (u * u.transpose()).cast<cplx>();
    }

    Superoperator operator()(const Eigen::VectorXd& n) const { return hamiltonian_superop(hamiltonian(n), *basis); }

    Eigen::VectorXd direction(double s) const {
        const double phi = 2.0 * std::numbers::pi * s;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(G + 1);
        v(0) = std::sin(theta) * std::cos(phi);
        v(1) = std::sin(theta) * std::sin(phi);
        v(G) = std::cos(theta);
        if (G == 3) v(2) = wobble * std::sin(2.0 * phi);
        return v.normalized();
    }

    ParameterPath standard_loop(std::size_t n = 1024) const {
        return make_path([m = *this](double s) { return m.direction(s); }, n, true);
    }

    ParameterPath trivial_loop(std::size_t n = 1024) const {
        return make_path([m = *this](double) { return m.direction(0.0); }, n, true);
    }

    // Smooth periodic orthonormal frame of the plane orthogonal to n(s). For
    // G = 2 the spherical unit vectors; otherwise the first G coordinate axes
    // projected onto the plane and Lowdin-orthonormalized.
    Eigen::MatrixXd frame(double s) const {
        if (G == 2) {
            const double phi = 2.0 * std::numbers::pi * s;
            Eigen::MatrixXd f(3, 2);
            f << std::cos(theta) * std::cos(phi), -std::sin(phi), std::cos(theta) * std::sin(phi), std::cos(phi),
                -std::sin(theta), 0.0;
            return f;
        }
        const Eigen::VectorXd u = direction(s);
        const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(G + 1, G + 1) - u * u.transpose();
        const Eigen::MatrixXd V = P * Eigen::MatrixXd::Identity(G + 1, G);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V.transpose() * V);
        return V * es.operatorInverseSqrt();
    }

    // Wilczek-Zee connection A_ij = <a_i| d/ds a_j> of the frame; the operators
    // |a_j><n| inherit it unchanged because n is real.
    Eigen::MatrixXd connection(double s, double h = 1e-5) const {
        const Eigen::MatrixXd f0 = frame(s);
        const Eigen::MatrixXd fp = frame(s + h), fm = frame(s - h);
        const Eigen::MatrixXd fp2 = frame(s + 2 * h), fm2 = frame(s - 2 * h);
        const Eigen::MatrixXd df = (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * h);
        return f0.transpose() * df;
    }

    // Right vectors of the degenerate +i eigenspace at s, in the frame gauge
    Eigen::MatrixXcd eigenspace(double s) const {
        const Eigen::MatrixXd f = frame(s);
        const Eigen::VectorXd u = direction(s);
        Eigen::MatrixXcd out(basis->size(), G);
        for (int j = 0; j < G; ++j) out.col(j) = expand((f.col(j) * u.transpose()).cast<cplx>(), *basis);
        return out;
    }
};

inline DegenerateModel synthetic_degenerate_model(int G, double theta = std::numbers::pi / 3.0) {
    if (G != 2 && G != 3) throw model_error("synthetic_degenerate_model: degeneracy must be 2 or 3");
    DegenerateModel m;
    m.G = G;
    m.theta = theta;
    m.basis = std::make_shared<OperatorBasis>(make_basis(G + 1));
    return m;
}

// Four-dimensional (D = 2 sized) non-physical family L(phi) = S(phi) J S(phi)^{-1}
// with J = diag(0, mu, [[lambda, kappa], [0, lambda]]). S only acts on the last
// two coordinates, so the identity row stays zero and the 2-chain persists
// along the loop phi = 2 pi s.
struct JordanChainModel {
    double lambda{-0.05};
    double mu{-0.5};
    double kappa{1.0};
    double squeeze{0.3};

    Eigen::MatrixXd similarity(double phi) const {
        Eigen::Matrix2d rot;
        rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
        Eigen::Matrix2d sq = Eigen::Matrix2d::Identity();
        sq(1, 1) = 1.0 + squeeze * std::sin(phi);
        Eigen::MatrixXd S = Eigen::MatrixXd::Identity(4, 4);
        S.block<2, 2>(2, 2) = rot * sq;
        return S;
    }

    Eigen::MatrixXd jordan_form() const {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, 4);
        J(1, 1) = mu;
        J(2, 2) = lambda;
        J(3, 3) = lambda;
        J(2, 3) = kappa;
        return J;
    }

    Superoperator operator()(const Eigen::VectorXd& r) const {
        if (r.size() != 1) throw dimension_error("JordanChainModel: parameter is a single angle");
        const Eigen::MatrixXd S = similarity(r(0));
        Superoperator out;
        out.dimension = 2;
        out.kind = SuperopKind::total;
        out.matrix = (S * jordan_form() * S.inverse()).cast<cplx>();
        return out;
    }

    ParameterPath loop(std::size_t n = 1024) const {
        return make_path(
            [](double s) {
                Eigen::VectorXd r(1);
                r << 2.0 * std::numbers::pi * s;
                return r;
            },
            n, true);
    }
};

inline JordanChainModel synthetic_jordan_chain_model() { return {}; }

} // namespace holoq
