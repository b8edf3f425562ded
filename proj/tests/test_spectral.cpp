#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <holoq/models.hpp>
#include <holoq/spectral.hpp>

using namespace holoq;

namespace {

Eigen::MatrixXcd random_matrix(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    Eigen::MatrixXcd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
    return m;
}

// L = S J S^{-1} with J built from the listed (eigenvalue, chain length) pairs
Eigen::MatrixXcd similar_to(const Eigen::MatrixXcd& S, const std::vector<std::pair<cplx, int>>& blocks) {
    const Eigen::Index n = S.rows();
    Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(n, n);
    Eigen::Index c = 0;
    for (const auto& [lam, len] : blocks) {
        for (int j = 0; j < len; ++j) {
            J(c + j, c + j) = lam;
            if (j > 0) J(c + j - 1, c + j) = 1.0;
        }
        c += len;
    }
    return S * J * S.inverse();
}

void expect_invariants(const JordanDecomposition& dec, const Eigen::MatrixXcd& L) {
    const auto r = verify(dec, L);
    EXPECT_LE(r.biorthonormality, 1e-10);
    EXPECT_LE(r.completeness, 1e-8);
    EXPECT_LE(r.chain, 1e-8);
}

} // namespace

TEST(Decompose, RandomDiagonalizableAgainstEigenvectorOracle) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXcd S = random_matrix(rng, 9);
        std::vector<std::pair<cplx, int>> blocks;
        for (int i = 0; i < 9; ++i) blocks.push_back({cplx(g(rng), g(rng)), 1});
        const Eigen::MatrixXcd L = similar_to(S, blocks);
        const auto dec = decompose(L);
        ASSERT_EQ(dec.blocks.size(), 9u);
        expect_invariants(dec, L);
        EXPECT_LE((reconstruct(dec) - L).cwiseAbs().maxCoeff(), 1e-9 * L.norm());
        // each right vector is parallel to the column of S with the same eigenvalue
        for (const auto& b : dec.blocks) {
            auto it = std::min_element(blocks.begin(), blocks.end(), [&](const auto& x, const auto& y) {
                return std::abs(x.first - b.eigenvalue) < std::abs(y.first - b.eigenvalue);
            });
            EXPECT_LE(std::abs(it->first - b.eigenvalue), 1e-9);
            const Eigen::VectorXcd s = S.col(it - blocks.begin()).normalized();
            EXPECT_NEAR(std::abs(s.dot(b.right.col(0).normalized())), 1.0, 1e-9);
        }
    }
}

TEST(Decompose, OrderingAndPhaseConvention) {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXcd S = random_matrix(rng, 5);
    const Eigen::MatrixXcd L =
        similar_to(S, {{cplx(-1, 0), 1}, {cplx(0.5, 2), 1}, {cplx(0.5, -2), 1}, {cplx(2, 0), 1}, {cplx(-3, 1), 1}});
    const auto dec = decompose(L);
    std::vector<cplx> ev;
    for (const auto& b : dec.blocks) ev.push_back(b.eigenvalue);
    EXPECT_NEAR(ev[0].real(), 2.0, 1e-10);
    EXPECT_NEAR(ev[1].imag(), -2.0, 1e-10);
    EXPECT_NEAR(ev[2].imag(), 2.0, 1e-10);
    EXPECT_NEAR(ev[3].real(), -1.0, 1e-10);
    EXPECT_NEAR(ev[4].real(), -3.0, 1e-10);
    for (const auto& b : dec.blocks) {
        Eigen::Index imax;
        b.right.col(0).cwiseAbs().maxCoeff(&imax);
        EXPECT_NEAR(b.right.col(0)(imax).imag(), 0.0, 1e-12);
        EXPECT_GT(b.right.col(0)(imax).real(), 0.0);
        EXPECT_NEAR(b.right.col(0).norm(), 1.0, 1e-12);
    }
}

TEST(Decompose, JordanChainsFromRandomSimilarity) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXcd S = random_matrix(rng, 7);
        const Eigen::MatrixXcd L = similar_to(S, {{cplx(0.3, 0.1), 3}, {cplx(-1, 0), 2}, {cplx(1, 1), 1}, {cplx(2, -1), 1}});
        // a 3-chain splits by ~eps^(1/3) in floating point, the tolerance has to cover that
        const auto dec = decompose(L, 1e-4);
        std::vector<int> lengths;
        for (const auto& b : dec.blocks) lengths.push_back(b.chain_length);
        std::sort(lengths.begin(), lengths.end());
        EXPECT_EQ(lengths, (std::vector<int>{1, 1, 2, 3}));
        expect_invariants(dec, L);
        EXPECT_LE((reconstruct(dec) - L).cwiseAbs().maxCoeff(), 1e-8 * L.norm());
    }
}

TEST(Decompose, DegenerateDiagonalizableCluster) {
    std::mt19937_64 rng(9);
    const Eigen::MatrixXcd S = random_matrix(rng, 6);
    const Eigen::MatrixXcd L = similar_to(S, {{1.0, 1}, {1.0, 1}, {1.0, 1}, {-2.0, 1}, {cplx(0, 1), 1}, {cplx(0, -1), 1}});
    const auto dec = decompose(L, 1e-6);
    EXPECT_EQ(dec.cluster_count, 4);
    int in_cluster = 0;
    for (const auto& b : dec.blocks)
        if (std::abs(b.eigenvalue - 1.0) < 1e-6) {
            ++in_cluster;
            EXPECT_EQ(b.chain_length, 1);
        }
    EXPECT_EQ(in_cluster, 3);
    expect_invariants(dec, L);
}

TEST(Decompose, PerturbedLeftVectorsShowInResidual) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    const Eigen::MatrixXcd S = random_matrix(rng, 4);
    const Eigen::MatrixXcd L = similar_to(S, {{1.0, 1}, {2.0, 1}, {3.0, 1}, {4.0, 1}});
    auto dec = decompose(L);
    const double eps = 1e-6;
    for (auto& b : dec.blocks)
        for (Eigen::Index j = 0; j < b.left.cols(); ++j) b.left(0, j) += eps * cplx(g(rng), g(rng));
    const double r = verify(dec, L).biorthonormality;
    EXPECT_GT(r, 0.1 * eps);
    EXPECT_LT(r, 10.0 * eps * S.norm());
}

TEST(Decompose, ClusterToleranceIsRecorded) {
    const Eigen::MatrixXcd L = Eigen::Vector3cd(1.0, 1.0 + 1e-9, -1.0).asDiagonal();
    const auto merged = decompose(L);
    EXPECT_EQ(merged.cluster_count, 2);
    EXPECT_DOUBLE_EQ(merged.cluster_tolerance, default_cluster_tol(L));
    const auto split = decompose(L, 1e-12);
    EXPECT_EQ(split.cluster_count, 3);
    EXPECT_DOUBLE_EQ(split.cluster_tolerance, 1e-12);
}

TEST(Decompose, NearlyDefectiveIsAccurateOrRefused) {
    // eigenvalues +-1e-9 with almost parallel eigenvectors; a tight tolerance keeps them apart
    Eigen::Matrix2cd L;
    L << 0, 1, 1e-18, 0;
    try {
        const auto dec = decompose(L, 1e-12);
        EXPECT_LE(verify(dec, L).biorthonormality, 1e-8);
    } catch (const ill_conditioned_error& e) {
        EXPECT_GT(e.residual, 0.0);
    }
    // default tolerance treats the pair as a 2-chain
    const auto chain = decompose(Eigen::MatrixXcd(L));
    ASSERT_EQ(chain.blocks.size(), 1u);
    EXPECT_EQ(chain.blocks[0].chain_length, 2);
}

TEST(Decompose, Errors) {
    EXPECT_THROW(decompose(Eigen::MatrixXcd(2, 3)), dimension_error);
    Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(decompose(bad), error);
    const auto dec = decompose(Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(3, 3)));
    EXPECT_THROW(verify(dec, Eigen::MatrixXcd::Identity(2, 2)), dimension_error);
}

TEST(Decompose, SpinModelsAlongThePath) {
    for (Channel ch : {Channel::none, Channel::dephasing, Channel::spontaneous_emission, Channel::bit_flip}) {
        SpinHalfModel m;
        m.channel = ch;
        m.beta = 0.2;
        const auto path = m.path(32);
        for (std::size_t k = 0; k < 32; ++k) {
            const auto L = m(path.at(path.s(k)));
            const auto dec = decompose(L);
            expect_invariants(dec, L.matrix);
        }
    }
}

TEST(Decompose, JordanChainModelHasOneTwoChain) {
    const auto m = synthetic_jordan_chain_model();
    const auto path = m.loop(64);
    for (std::size_t k = 0; k < 64; k += 7) {
        const auto L = m(path.at(path.s(k)));
        const auto dec = decompose(L, 1e-6);
        int chains = 0;
        for (const auto& b : dec.blocks)
            if (b.chain_length == 2) {
                ++chains;
                EXPECT_NEAR(std::abs(b.eigenvalue - m.lambda), 0.0, 1e-10);
            }
        EXPECT_EQ(chains, 1);
        expect_invariants(dec, L.matrix);
        // geometric multiplicity 1: (L - lambda) has rank 3
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(L.matrix - m.lambda * Eigen::MatrixXcd::Identity(4, 4));
        EXPECT_LT(svd.singularValues()(3), 1e-12);
        EXPECT_GT(svd.singularValues()(2), 1e-3);
    }
}
