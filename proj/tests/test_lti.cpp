#include <doctest.h>

#include <cmath>
#include <vector>

#include "robsid/errors.hpp"
#include "robsid/lti.hpp"
#include "support/oracles.hpp"

using namespace robsid;

namespace {

Matrix dare_residual(const Matrix& a, const Matrix& c, const Matrix& r_w, const Matrix& r_v,
                     const Matrix& p) {
    const Matrix s = c * p * c.transpose() + r_v;
    const Matrix next = a * p * a.transpose() -
                        a * p * c.transpose() * s.inverse() * c * p * a.transpose() + r_w;
    return next - p;
}

StateSpaceModel random_model(Index nx, Rng& rng) {
    StateSpaceModel m;
    Matrix aux = rng.normal_matrix(nx, nx);
    m.a = aux / spectral_radius(aux) * 0.8;
    m.b = rng.normal_matrix(nx, 1);
    m.c = rng.normal_matrix(1, nx);
    m.d = Matrix::Zero(1, 1);
    Matrix w = rng.normal_matrix(nx, nx);
    m.r_w = w * w.transpose();
    m.r_v = Matrix::Constant(1, 1, 0.5 + rng.uniform());
    KalmanSolution kf = kalman_gain(m.a, m.c, m.r_w, m.r_v);
    m.k = kf.k;
    m.sigma = kf.sigma;
    return m;
}

}  // namespace

TEST_CASE("protocol sizes") {
    CHECK(protocol_sample_size(4) == 160);
    CHECK(protocol_horizon(160) == 16);
    CHECK(protocol_sample_size(1) == 80);
    CHECK(protocol_sample_size(10) == 252);
    CHECK(protocol_horizon(252) == 25);
}

TEST_CASE("sample_system respects the protocol") {
    SystemSpec spec;
    for (int run = 0; run < 200; ++run) {
        Rng rng = Rng::stream(11, run);
        SampledSystem s = sample_system(spec, rng);
        const StateSpaceModel& m = s.model;
        CHECK(m.n_x() >= 1);
        CHECK(m.n_x() <= 10);
        CHECK(spectral_radius(m.a) < 1.0);
        CHECK(spectral_radius(m.a - m.k * m.c) < 1.0);
        CHECK(m.d.norm() == 0.0);
        CHECK(s.n == protocol_sample_size(m.n_x()));
        CHECK(s.horizon == s.n / 10);
        CHECK(std::log10(s.snr) >= -1.0);
        CHECK(std::log10(s.snr) <= 2.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(m.sigma);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("sampled spectral radius equals the drawn lambda_a") {
    // Replay the draw order of sample_system to recover lambda_a.
    SystemSpec spec;
    for (int run = 0; run < 50; ++run) {
        Rng replay = Rng::stream(12, run);
        const int nx = replay.uniform_int(spec.nx_min, spec.nx_max);
        replay.normal_matrix(nx, nx);
        const double lambda_a = replay.uniform();
        Rng rng = Rng::stream(12, run);
        SampledSystem s = sample_system(spec, rng);
        if (s.model.n_x() != nx) continue;  // first draw was rejected and retried
        CHECK(std::abs(spectral_radius(s.model.a) - lambda_a) <= 1e-10);
    }
}

TEST_CASE("state dimension histogram is uniform") {
    SystemSpec spec;
    std::vector<double> counts(10, 0.0);
    const int draws = 1000;
    for (int run = 0; run < draws; ++run) {
        Rng rng = Rng::stream(13, run);
        counts[sample_system(spec, rng).model.n_x() - 1] += 1.0;
    }
    double stat = 0.0;
    for (double c : counts) stat += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
    CHECK(oracle::chi_square_sf(stat, 9.0) > 0.01);
}

TEST_CASE("kalman_gain trivial cases") {
    Rng rng(14);
    Matrix a = Matrix::Zero(2, 2);
    Matrix c = rng.normal_matrix(1, 2);
    Matrix w = rng.normal_matrix(2, 2);
    Matrix r_w = w * w.transpose();
    Matrix r_v = Matrix::Constant(1, 1, 0.7);
    KalmanSolution kf = kalman_gain(a, c, r_w, r_v);
    CHECK((kf.p - r_w).norm() <= 1e-12 * r_w.norm());
    CHECK((kf.sigma - (c * r_w * c.transpose() + r_v)).norm() <= 1e-12);
    CHECK(kf.k.norm() <= 1e-14);

    KalmanSolution scalar = kalman_gain(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                                        Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0));
    CHECK(scalar.p(0, 0) == 0.0);
    CHECK(scalar.k(0, 0) == 0.0);
    CHECK(scalar.sigma(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("kalman_gain DARE residual and stability") {
    Rng rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        StateSpaceModel m = random_model(3, rng);
        KalmanSolution kf = kalman_gain(m.a, m.c, m.r_w, m.r_v);
        CHECK(dare_residual(m.a, m.c, m.r_w, m.r_v, kf.p).norm() <= 1e-8 * (1.0 + kf.p.norm()));
        CHECK(spectral_radius(m.a - kf.k * m.c) < 1.0);
        const Matrix k_ref = m.a * kf.p * m.c.transpose() * kf.sigma.inverse();
        CHECK((kf.k - k_ref).norm() <= 1e-10 * (1.0 + k_ref.norm()));
    }
}

TEST_CASE("simulate impulse response without noise") {
    Rng rng(16);
    StateSpaceModel m = random_model(3, rng);
    m.r_w.setZero();
    m.r_v.setZero();
    const Index t = 12;
    Matrix u = Matrix::Zero(1, t);
    u(0, 0) = 1.0;
    Matrix y = simulate(m, u, rng, 0);
    CHECK(std::abs(y(0, 0)) <= 1e-15);
    Matrix ak = Matrix::Identity(3, 3);
    for (Index k = 1; k < t; ++k) {
        CHECK(y(0, k) == doctest::Approx((m.c * ak * m.b)(0, 0)).epsilon(1e-12));
        ak = ak * m.a;
    }
}

TEST_CASE("simulate output variance matches the Lyapunov prediction") {
    Rng rng(17);
    StateSpaceModel m = random_model(2, rng);
    const Index t = 100000;
    Matrix y = simulate(m, Matrix::Zero(1, t + 500), rng, 500);
    const double var = (y.array() - y.mean()).square().sum() / static_cast<double>(t - 1);
    const Matrix p = oracle::lyapunov(m.a, m.r_w);
    const double expected = (m.c * p * m.c.transpose() + m.r_v)(0, 0);
    CHECK(std::abs(var - expected) <= 0.10 * expected);
}

TEST_CASE("simulate is deterministic for a fixed stream") {
    Rng rng(18);
    StateSpaceModel m = random_model(3, rng);
    Matrix u = rng.normal_matrix(1, 300);
    Rng r1(99), r2(99);
    CHECK((simulate(m, u, r1, 50) - simulate(m, u, r2, 50)).norm() == 0.0);
}

TEST_CASE("innovation form and standard form share output spectra") {
    Rng rng(19);
    StateSpaceModel m = random_model(2, rng);
    const Index t = 100000;
    Matrix y = simulate(m, Matrix::Zero(1, t + 500), rng, 500);
    // Innovation form x+ = A x + K e, y = C x + e with e ~ N(0, Sigma).
    Rng rng2(20);
    const double sd = std::sqrt(m.sigma(0, 0));
    Vector x = Vector::Zero(2);
    std::vector<double> y2;
    y2.reserve(t);
    for (Index k = 0; k < t + 500; ++k) {
        const double e = sd * rng2.normal();
        if (k >= 500) y2.push_back((m.c * x)(0) + e);
        x = m.a * x + m.k * e;
    }
    std::vector<double> y1(y.data(), y.data() + y.size());
    const auto p1 = oracle::welch_psd(y1, 64);
    const auto p2 = oracle::welch_psd(y2, 64);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < p1.size(); ++k) {
        num += (p1[k] - p2[k]) * (p1[k] - p2[k]);
        den += p1[k] * p1[k];
    }
    CHECK(std::sqrt(num / den) <= 0.10);
}

TEST_CASE("true_decomposition first block row") {
    Rng rng(21);
    StateSpaceModel m = random_model(2, rng);
    m.d = Matrix::Constant(1, 1, 0.3);
    TrueDecomposition td = true_decomposition(m, 1, 3);
    CHECK((td.gamma_f - m.c).norm() == 0.0);
    CHECK((td.h_f - m.d).norm() == 0.0);
    CHECK(td.g_f(0, 0) == doctest::Approx(std::sqrt(m.sigma(0, 0))));
}

TEST_CASE("true_decomposition with K = 0 ignores past outputs") {
    Rng rng(22);
    StateSpaceModel m = random_model(3, rng);
    m.k.setZero();
    TrueDecomposition td = true_decomposition(m, 4, 4);
    CHECK(td.l_p.rightCols(4).norm() == 0.0);
    CHECK(td.h_fp.rightCols(4).norm() == 0.0);
}

TEST_CASE("true_decomposition block structure, factorization and rank") {
    Rng rng(23);
    for (Index nx = 1; nx <= 3; ++nx) {
        for (int trial = 0; trial < 5; ++trial) {
            StateSpaceModel m = random_model(nx, rng);
            const Index f = 3, p = 3;
            TrueDecomposition td = true_decomposition(m, f, p);
            CHECK((td.h_fp - td.gamma_f * td.l_p).norm() <= 1e-12 * (1.0 + td.h_fp.norm()));
            const Matrix ak = m.a - m.k * m.c;
            const Matrix bk1 = m.b - m.k * m.d;
            const Matrix& bk2 = m.k;
            auto mpow = [](const Matrix& x, Index e) {
                Matrix r = Matrix::Identity(x.rows(), x.cols());
                for (Index k = 0; k < e; ++k) r = r * x;
                return r;
            };
            for (Index r = 0; r < f; ++r) {
                for (Index q = 0; q < p; ++q) {
                    const Matrix left = m.c * mpow(m.a, r) * mpow(ak, p - 1 - q);
                    CHECK(std::abs(td.h_fp(r, q) - (left * bk1)(0, 0)) <= 1e-12);
                    CHECK(std::abs(td.h_fp(r, p + q) - (left * bk2)(0, 0)) <= 1e-12);
                }
            }
            Eigen::JacobiSVD<Matrix> svd(td.h_fp);
            const Vector s = svd.singularValues();
            Index rank = 0;
            for (Index k = 0; k < s.size(); ++k) rank += s(k) > 1e-8 * s(0);
            CHECK(rank == nx);
            // Diagonal blocks of G_f are Sigma^1/2.
            for (Index k = 0; k < f; ++k)
                CHECK(td.g_f(k, k) == doctest::Approx(std::sqrt(m.sigma(0, 0))));
        }
    }
}
