#include <doctest.h>

#include <cmath>
#include <vector>

#include "robsid/bayes.hpp"
#include "robsid/errors.hpp"
#include "robsid/lti.hpp"
#include "support/oracles.hpp"

using namespace robsid;

namespace {

StateSpaceModel reference_model() {
    StateSpaceModel m;
    m.a.resize(2, 2);
    m.a << 0.6, 0.3, -0.2, 0.4;
    m.b.resize(2, 1);
    m.b << 1.0, 0.3;
    m.c.resize(1, 2);
    m.c << 1.0, 0.5;
    m.d = Matrix::Zero(1, 1);
    m.r_w = 0.1 * Matrix::Identity(2, 2);
    m.r_v = Matrix::Constant(1, 1, 0.5);
    KalmanSolution kf = kalman_gain(m.a, m.c, m.r_w, m.r_v);
    m.k = kf.k;
    m.sigma = kf.sigma;
    return m;
}

HankelData simulated_data(const StateSpaceModel& m, Index t, Index f, Index p, Rng& rng) {
    const Matrix u = 2.0 * rng.normal_matrix(1, t + 200);
    const Matrix y = simulate(m, u, rng, 200);
    return assemble(u.rightCols(t), y, f, p);
}

struct Fitted {
    HankelData data;
    LsEstimate ls;
};

Fitted fitted(Index t, Index f, Index p, std::uint64_t seed) {
    Rng rng(seed);
    Fitted out{simulated_data(reference_model(), t, f, p, rng), {}};
    out.ls = ls_estimate(out.data);
    return out;
}

}  // namespace

TEST_CASE("init_gibbs empirical priors") {
    Fitted fx = fitted(200, 5, 5, 1);
    GibbsState st = init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 2);
    const Matrix m = fx.ls.h_fp_hat * fx.data.z_p;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector s = svd.singularValues();
    for (Index k = 0; k < 2; ++k) {
        CHECK(st.lambda_gamma(k, k) == doctest::Approx(5.0 / s(k)));
        CHECK(st.lambda_l(k, k) == doctest::Approx(static_cast<double>(fx.data.n_cols) / s(k)));
    }
    CHECK(st.lambda_gamma(0, 1) == 0.0);
    CHECK(st.lambda_h(0, 0) == doctest::Approx(25.0 / fx.ls.h_f_hat.squaredNorm()));
    CHECK(st.g_f.isIdentity(0.0));
    CHECK(st.gamma_scalar() == 1.0);
    CHECK((st.x_p - st.l_p * fx.data.z_p).norm() == 0.0);
    CHECK((st.h_f - toeplitz_project(st.h_f)).norm() <= 1e-14);
    CHECK_FALSE(st.rank_warning);

    // Prior follows the data scale.
    GibbsState scaled = init_gibbs(3.0 * fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 2);
    CHECK(scaled.lambda_gamma(0, 0) == doctest::Approx(st.lambda_gamma(0, 0) / 3.0));
}

TEST_CASE("init_gibbs reproduces a rank-1 product") {
    Fitted fx = fitted(120, 4, 4, 2);
    Rng rng(3);
    const Matrix h = rng.normal_matrix(4, 1) * rng.normal_matrix(1, 8);
    GibbsState st = init_gibbs(h, fx.ls.h_f_hat, fx.data, 1);
    const Matrix target = h * fx.data.z_p;
    CHECK((st.gamma_f * st.l_p * fx.data.z_p - target).norm() <= 1e-8 * target.norm());
    GibbsState over = init_gibbs(h, fx.ls.h_f_hat, fx.data, 2);
    CHECK(over.rank_warning);
}

TEST_CASE("init_gibbs guards") {
    Fitted fx = fitted(120, 4, 4, 4);
    CHECK_THROWS_AS(init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 0), DataError);
    CHECK_THROWS_AS(init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 5), DataError);
    Rng rng(5);
    HankelData mimo = assemble(rng.normal_matrix(2, 60), rng.normal_matrix(2, 60), 3, 3);
    CHECK_THROWS_AS(init_gibbs(Matrix::Ones(6, 12), Matrix::Ones(6, 6), mimo, 1),
                    UnsupportedError);
}

TEST_CASE("step_gamma_hf ridge limits") {
    Fitted fx = fitted(150, 4, 4, 6);
    GibbsState st = init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 2);
    Rng rng(7);

    GibbsState free_state = st;
    free_state.lambda_gamma *= 1e-14;
    free_state.lambda_h *= 1e-14;
    GammaHfDraw ls = step_gamma_hf(free_state, fx.data, rng, true);
    Matrix reg(2 + 4, fx.data.n_cols);
    reg << st.x_p, fx.data.u_f;
    const Matrix theta = fx.data.y_f * reg.transpose() * (reg * reg.transpose()).inverse();
    CHECK((ls.gamma_f - theta.leftCols(2)).norm() <= 1e-6 * theta.norm());
    CHECK((ls.h_f - toeplitz_project(theta.rightCols(4))).norm() <= 1e-6 * theta.norm());

    GibbsState heavy = st;
    heavy.lambda_gamma *= 1e14;
    heavy.lambda_h *= 1e14;
    GammaHfDraw zero = step_gamma_hf(heavy, fx.data, rng, false);
    CHECK(zero.gamma_f.norm() <= 1e-5 * theta.norm());
    CHECK(zero.h_f.norm() <= 1e-5 * theta.norm());
}

TEST_CASE("step_gamma_hf sampler mean") {
    Fitted fx = fitted(12, 3, 2, 8);  // N = 8
    REQUIRE(fx.data.n_cols == 8);
    GibbsState st = init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 1);
    st.g_f = Matrix::Identity(3, 3) * 0.7;
    st.g_f(1, 0) = st.g_f(2, 1) = 0.2;
    Rng rng(9);
    const GammaHfDraw mean = step_gamma_hf(st, fx.data, rng, true);
    const int draws = 10000;
    Matrix sum = Matrix::Zero(3, 1 + 3), sum_sq = Matrix::Zero(3, 1 + 3);
    for (int k = 0; k < draws; ++k) {
        GammaHfDraw d = step_gamma_hf(st, fx.data, rng, false);
        Matrix both(3, 4);
        both << d.gamma_f, d.h_f;
        sum += both;
        sum_sq += both.cwiseProduct(both);
    }
    Matrix ref(3, 4);
    ref << mean.gamma_f, mean.h_f;
    for (Index r = 0; r < 3; ++r) {
        for (Index c = 0; c < 4; ++c) {
            const double mu = sum(r, c) / draws;
            const double var = sum_sq(r, c) / draws - mu * mu;
            if (var <= 1e-24) {
                CHECK(std::abs(mu - ref(r, c)) <= 1e-10);  // structurally zero entries
                continue;
            }
            CHECK(std::abs(mu - ref(r, c)) <= 3.0 * std::sqrt(var / draws));
        }
    }
}

TEST_CASE("step_lp limits") {
    Fitted fx = fitted(150, 4, 4, 10);
    GibbsState st = init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 2);
    Rng rng(11);
    const Matrix target = fx.data.y_f - st.h_f * fx.data.u_f;

    GibbsState free_state = st;
    free_state.lambda_l *= 1e-14;
    LpDraw ls = step_lp(free_state, fx.data, rng, true);
    const Matrix& g = st.gamma_f;
    const Matrix expected =
        (g.transpose() * g).inverse() * g.transpose() * target * pinv(fx.data.z_p);
    CHECK((ls.l_p - expected).norm() <= 1e-6 * expected.norm());

    GibbsState ortho = st;
    Eigen::HouseholderQR<Matrix> qr(st.gamma_f);
    ortho.gamma_f = Matrix(qr.householderQ()).leftCols(2);
    ortho.lambda_l = Matrix::Identity(2, 2);
    LpDraw half = step_lp(ortho, fx.data, rng, true);
    const Matrix closed = 0.5 * ortho.gamma_f.transpose() * target * pinv(fx.data.z_p);
    CHECK((half.l_p - closed).norm() <= 1e-10 * closed.norm());
}

TEST_CASE("step_lp sampler mean") {
    Fitted fx = fitted(12, 3, 2, 12);
    GibbsState st = init_gibbs(fx.ls.h_fp_hat, fx.ls.h_f_hat, fx.data, 1);
    Rng rng(13);
    const LpDraw mean = step_lp(st, fx.data, rng, true);
    const int draws = 10000;
    Matrix sum = Matrix::Zero(1, 4), sum_sq = Matrix::Zero(1, 4);
    for (int k = 0; k < draws; ++k) {
        LpDraw d = step_lp(st, fx.data, rng, false);
        sum += d.l_p;
        sum_sq += d.l_p.cwiseProduct(d.l_p);
    }
    for (Index c = 0; c < 4; ++c) {
        const double mu = sum(0, c) / draws;
        const double var = sum_sq(0, c) / draws - mu * mu;
        CHECK(std::abs(mu - mean.l_p(0, c)) <= 3.0 * std::sqrt(var / draws));
    }
}

TEST_CASE("gf_posterior_omega matches the dense selector formula") {
    Rng rng(14);
    for (Index i : {1, 2, 3, 5}) {
        for (Index j : {1, 4, 9}) {
            const Matrix e = rng.normal_matrix(i, j);
            for (GfVariant v : {GfVariant::independent, GfVariant::hankel_exact}) {
                const Matrix dense = oracle::dense_omega(e, v);
                CHECK((gf_posterior_omega(e, v) - dense).norm() <= 1e-10 * (1.0 + dense.norm()));
            }
        }
    }
}

TEST_CASE("chi degrees") {
    CHECK(gf_chi_dof(GfVariant::hankel_exact, 4, 30) == 30.0);
    CHECK(gf_chi_dof(GfVariant::independent, 4, 30) == 117.0);
    CHECK(gf_chi_dof(GfVariant::independent, 1, 30) == 30.0);
}

TEST_CASE("step_gf change of variables and structure") {
    Rng rng(15);
    const Matrix e = rng.normal_matrix(5, 40);
    for (GfVariant v : {GfVariant::independent, GfVariant::hankel_exact}) {
        for (int k = 0; k < 200; ++k) {
            GfDraw d = step_gf(e, rng, v);
            const Vector back = d.omega_l.transpose() * d.inv_last_row;
            CHECK((back - d.nu).norm() <= 1e-10 * (1.0 + d.nu.norm()));
            CHECK((d.g_f - toeplitz_project(d.g_f)).norm() <= 1e-10 * d.g_f.norm());
            CHECK(d.g_f.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
            CHECK(std::abs(d.g_f(0, 0)) > 0.0);
            const Matrix inv = d.g_f.inverse();
            CHECK((inv.row(4).transpose() - d.inv_last_row).norm() <=
                  1e-8 * d.inv_last_row.norm());
        }
    }
}

TEST_CASE("step_gf rejects degenerate residues") {
    Rng rng(16);
    Matrix e = Matrix::Zero(3, 10);
    try {
        step_gf(e, rng, GfVariant::independent);
        FAIL("expected NumericalError");
    } catch (const NumericalError& err) {
        CHECK(err.value() <= 0.0);
    }
}

TEST_CASE("scalar posterior matches inverse-CDF sampling") {
    Rng rng(17);
    const Index j = 25;
    const Matrix e = 0.8 * rng.normal_matrix(1, j);
    const double s = e.squaredNorm();
    for (GfVariant v : {GfVariant::independent, GfVariant::hankel_exact}) {
        std::vector<double> draws;
        for (int k = 0; k < 10000; ++k) draws.push_back(step_gf(e, rng, v).inv_last_row(0));
        std::vector<double> ref = oracle::scalar_posterior_samples(s, j, 10000, rng);
        CHECK(oracle::ks_two_sample_p(draws, ref) > 0.01);
    }
}

TEST_CASE("Toeplitz group equivariance") {
    Rng rng(18);
    const Index i = 4;
    const Matrix e = rng.normal_matrix(i, 30);
    const Matrix t = oracle::random_lower_toeplitz(i, rng);
    for (GfVariant v : {GfVariant::independent, GfVariant::hankel_exact}) {
        // Exact per draw for a shared nu.
        Rng r1(77), r2(77);
        GfDraw base = step_gf(e, r1, v);
        GfDraw moved = step_gf(t * e, r2, v);
        CHECK((moved.g_f - t * base.g_f).norm() <= 1e-8 * (t * base.g_f).norm());

        // Moment comparison with independent streams.
        const int draws = 5000;
        Vector m1 = Vector::Zero(i), m2 = Vector::Zero(i), q1 = Vector::Zero(i),
               q2 = Vector::Zero(i);
        Rng ra(1001), rb(2002);
        const Matrix t_inv_t = t.inverse().transpose();
        for (int k = 0; k < draws; ++k) {
            const Vector a = t_inv_t * step_gf(e, ra, v).inv_last_row;
            const Vector b = step_gf(t * e, rb, v).inv_last_row;
            m1 += a;
            m2 += b;
            q1 += a.cwiseProduct(a);
            q2 += b.cwiseProduct(b);
        }
        m1 /= draws;
        m2 /= draws;
        q1 /= draws;
        q2 /= draws;
        for (Index k = 0; k < i; ++k) {
            const double v1 = q1(k) - m1(k) * m1(k);
            const double v2 = q2(k) - m2(k) * m2(k);
            CHECK(std::abs(m1(k) - m2(k)) <= 4.0 * std::sqrt((v1 + v2) / draws));
            // Second moments: standard error from a normal-theory approximation.
            const double se_q = std::sqrt((2.0 * v1 * v1 + 4.0 * v1 * m1(k) * m1(k) + 2.0 * v2 * v2 +
                                           4.0 * v2 * m2(k) * m2(k)) /
                                          draws);
            CHECK(std::abs(q1(k) - q2(k)) <= 4.0 * se_q);
        }
    }
}

TEST_CASE("Gaussian prior factors are orthogonal in expectation") {
    Rng rng(19);
    const Index i = 6, r = 3;
    const int draws = 10000;
    Matrix sum = Matrix::Zero(r, r), sum_sq = Matrix::Zero(r, r);
    for (int k = 0; k < draws; ++k) {
        const Matrix xi = rng.normal_matrix(i, r);
        const Matrix g = xi.transpose() * xi / static_cast<double>(i);
        sum += g;
        sum_sq += g.cwiseProduct(g);
    }
    for (Index a = 0; a < r; ++a) {
        for (Index b = 0; b < r; ++b) {
            const double mu = sum(a, b) / draws;
            const double var = sum_sq(a, b) / draws - mu * mu;
            CHECK(std::abs(mu - (a == b ? 1.0 : 0.0)) <= 3.0 * std::sqrt(var / draws));
        }
    }
}

TEST_CASE("run_gibbs boundary and determinism") {
    Fitted fx = fitted(200, 5, 5, 20);
    GibbsConfig cfg;
    cfg.rank = 2;
    cfg.n_total = 2;
    cfg.n_burn = 1;
    cfg.rao_blackwell = false;
    Rng r1(5);
    GibbsEstimate single = run_gibbs(fx.data, fx.ls.h_fp_hat, fx.ls.h_f_hat, cfg, r1);
    REQUIRE(single.chain_norms.size() == 1);
    CHECK(single.h_fp_bayes.norm() == doctest::Approx(single.chain_norms[0]).epsilon(1e-12));

    cfg.n_total = 30;
    cfg.rao_blackwell = true;
    Rng a(6), b(6);
    GibbsEstimate ea = run_gibbs(fx.data, fx.ls.h_fp_hat, fx.ls.h_f_hat, cfg, a);
    GibbsEstimate eb = run_gibbs(fx.data, fx.ls.h_fp_hat, fx.ls.h_f_hat, cfg, b);
    CHECK((ea.h_fp_bayes - eb.h_fp_bayes).norm() == 0.0);
    CHECK(ea.chain_norms == eb.chain_norms);

    cfg.n_burn = 30;
    Rng c(7);
    CHECK_THROWS_AS(run_gibbs(fx.data, fx.ls.h_fp_hat, fx.ls.h_f_hat, cfg, c), DataError);
}

TEST_CASE("run_gibbs chain has no trend after burn-in") {
    Fitted fx = fitted(300, 6, 6, 21);
    GibbsConfig cfg;
    cfg.rank = 2;
    Rng rng(8);
    GibbsEstimate est = run_gibbs(fx.data, fx.ls.h_fp_hat, fx.ls.h_f_hat, cfg, rng);
    REQUIRE(est.chain_norms.size() == 249);
    std::vector<double> second(est.chain_norms.begin() + 125, est.chain_norms.end());
    CHECK(oracle::mann_kendall_p(second) > 0.01);
    CHECK(est.h_fp_bayes.allFinite());
}

TEST_CASE("run_gibbs noiseless rank-2 recovery") {
    StateSpaceModel m = reference_model();
    m.k = oracle::deadbeat_gain(m.a, m.c);
    m.r_w.setZero();
    m.r_v.setZero();
    Rng rng(22);
    const Index f = 4, p = 2;
    HankelData d = simulated_data(m, 200, f, p, rng);
    LsEstimate ls = ls_estimate(d);
    const TrueDecomposition td = true_decomposition(m, f, p);
    for (GfVariant v : {GfVariant::independent, GfVariant::hankel_exact}) {
        GibbsConfig cfg;
        cfg.rank = 2;
        cfg.gf_variant = v;
        Rng chain(23);
        GibbsEstimate est = run_gibbs(d, ls.h_fp_hat, ls.h_f_hat, cfg, chain);
        CHECK((est.h_fp_bayes - td.h_fp).norm() <= 0.05 * td.h_fp.norm());
    }
}
