#include "robsid/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robsid/errors.hpp"

namespace robsid {

std::string to_string(GfVariant variant) {
    return variant == GfVariant::hankel_exact ? "hankel" : "independent";
}

GfVariant parse_gf_variant(const std::string& name) {
    if (name == "hankel" || name == "hankel_exact") return GfVariant::hankel_exact;
    if (name == "independent") return GfVariant::independent;
    throw DataError("unknown G_f posterior variant '" + name + "'");
}

double GibbsState::gamma_scalar() const { return 1.0 / (g_f(0, 0) * g_f(0, 0)); }

Matrix GibbsState::g_bar() const { return g_f / g_f(0, 0); }

Matrix GibbsState::sigma_e() const { return g_f * g_f.transpose(); }

GibbsState init_gibbs(const Matrix& h_fp_hat, const Matrix& h_f_hat, const HankelData& data,
                      Index rank) {
    if (data.n_i != 1 || data.n_o != 1)
        throw UnsupportedError("Bayesian ALS estimator supports SISO data only");
    const Index i = data.y_f.rows();
    const Index j = data.n_cols;
    if (rank < 1 || rank > std::min(i, data.z_p.rows()))
        throw DataError("init_gibbs: rank " + std::to_string(rank) + " out of range");

    GibbsState st;
    st.zp_pinv = pinv(data.z_p);
    const Matrix m = h_fp_hat * data.z_p;
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s_all = svd.singularValues();
    const double s_max = s_all(0);
    st.rank_warning = !(s_all(rank - 1) > 1e-10 * s_max);
    const Vector s = s_all.head(rank).cwiseMax(std::max(1e-12 * s_max, 1e-300));
    const Vector s_half = s.cwiseSqrt();

    st.gamma_f = svd.matrixU().leftCols(rank) * s_half.asDiagonal();
    st.l_p = s_half.asDiagonal() * svd.matrixV().leftCols(rank).transpose() * st.zp_pinv;
    st.x_p = st.l_p * data.z_p;
    st.h_f = toeplitz_project(h_f_hat);
    st.g_f = Matrix::Identity(i, i);
    st.lambda_gamma = (static_cast<double>(i) * s.cwiseInverse()).asDiagonal();
    st.lambda_l = (static_cast<double>(j) * s.cwiseInverse()).asDiagonal();
    const double h_energy = std::max(h_f_hat.squaredNorm(), 1e-300);
    st.lambda_h = Matrix::Identity(i, i) * (static_cast<double>(i * i) / h_energy);
    return st;
}

GammaHfDraw step_gamma_hf(const GibbsState& state, const HankelData& data, Rng& rng,
                          bool deterministic) {
    const Index r = state.gamma_f.cols();
    const Index i = data.y_f.rows();
    const Index k = r + data.u_f.rows();

    Matrix reg(k, data.n_cols);
    reg << state.x_p, data.u_f;
    Matrix prior = Matrix::Zero(k, k);
    prior.topLeftCorner(r, r) = state.lambda_gamma;
    prior.bottomRightCorner(k - r, k - r) = state.lambda_h;

    const double gamma = state.gamma_scalar();
    Matrix precision = prior + gamma * reg * reg.transpose();
    precision = 0.5 * (precision + precision.transpose());
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success)
        throw NumericalError("step_gamma_hf: penalized Gram matrix is not positive definite");

    const Matrix mean = llt.solve(gamma * reg * data.y_f.transpose()).transpose();
    Matrix draw = mean;
    if (!deterministic) {
        const Matrix xi = rng.normal_matrix(i, k);
        draw += state.g_bar() * xi * psd_sqrt(precision, true);
    }

    GammaHfDraw out;
    out.gamma_mean = mean.leftCols(r);
    out.h_f_mean = toeplitz_project(mean.rightCols(k - r));
    out.gamma_f = draw.leftCols(r);
    out.h_f = toeplitz_project(draw.rightCols(k - r));
    return out;
}

LpDraw step_lp(const GibbsState& state, const HankelData& data, Rng& rng, bool deterministic) {
    const Index r = state.gamma_f.cols();
    const auto g_lower = state.g_f.triangularView<Eigen::Lower>();
    // Whitening by G_f^-1 turns Sigma_e^-1 weighted products into plain ones.
    const Matrix w_gamma = g_lower.solve(state.gamma_f);
    const Matrix w_target = g_lower.solve(data.y_f - state.h_f * data.u_f);
    Matrix precision = w_gamma.transpose() * w_gamma + state.lambda_l;
    precision = 0.5 * (precision + precision.transpose());
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success)
        throw NumericalError("step_lp: posterior precision is not positive definite");

    const Matrix mean = llt.solve(w_gamma.transpose() * w_target);
    LpDraw out;
    out.l_p_mean = mean * state.zp_pinv;
    if (deterministic) {
        out.l_p = out.l_p_mean;
    } else {
        const Matrix xi = rng.normal_matrix(r, data.n_cols);
        out.l_p = (mean + psd_sqrt(precision, true) * xi) * state.zp_pinv;
    }
    return out;
}

namespace {

// Row-shifted copy: out(r, :) = e(r - shift, :), zero above.
Matrix shift_down(const Matrix& e, Index shift) {
    Matrix out = Matrix::Zero(e.rows(), e.cols());
    if (shift < e.rows()) out.bottomRows(e.rows() - shift) = e.topRows(e.rows() - shift);
    return out;
}

}  // namespace

Matrix gf_posterior_omega(const Matrix& residues, GfVariant variant) {
    const Index i = residues.rows();
    const Index j = residues.cols();
    Matrix omega(i, i);
    if (variant == GfVariant::independent) {
        // Column m of (E^T x I) B_T is vec(S^(i-1-m) E) for the down-shift S,
        // so Omega(a, b) sums the lagged row Gram matrix of E.
        const Matrix c = residues * residues.transpose();
        for (Index a = 0; a < i; ++a) {
            for (Index b = 0; b <= a; ++b) {
                const Index ka = i - 1 - a;
                const Index kb = i - 1 - b;
                double acc = 0.0;
                for (Index r = std::max(ka, kb); r < i; ++r) acc += c(r - ka, r - kb);
                omega(a, b) = omega(b, a) = acc;
            }
        }
        return omega;
    }
    // Hankel-exact: B_W (B_W^T B_W)^-1 B_W^T averages over anti-diagonals, so
    // Omega(a, b) = sum_d sum_d(K_a) sum_d(K_b) / count_d.
    const Index diags = i + j - 1;
    Matrix sums = Matrix::Zero(i, diags);
    for (Index m = 0; m < i; ++m) {
        const Matrix k = shift_down(residues, i - 1 - m);
        for (Index c = 0; c < j; ++c)
            for (Index r = 0; r < i; ++r) sums(m, r + c) += k(r, c);
    }
    Vector inv_count(diags);
    for (Index d = 0; d < diags; ++d) {
        const Index lo = std::max<Index>(0, d - (j - 1));
        const Index hi = std::min<Index>(i - 1, d);
        inv_count(d) = 1.0 / static_cast<double>(hi - lo + 1);
    }
    omega = sums * inv_count.asDiagonal() * sums.transpose();
    return 0.5 * (omega + omega.transpose());
}

double gf_chi_dof(GfVariant variant, Index i, Index j) {
    const double di = static_cast<double>(i);
    const double dj = static_cast<double>(j);
    return variant == GfVariant::hankel_exact ? dj : di * dj - di + 1.0;
}

GfDraw step_gf(const Matrix& residues, Rng& rng, GfVariant variant) {
    const Index i = residues.rows();
    const Index j = residues.cols();
    const Matrix omega = gf_posterior_omega(residues, variant);
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(omega, Eigen::EigenvaluesOnly);
        const double min_ev = eig.eigenvalues().minCoeff();
        throw NumericalError("step_gf: Omega is not positive definite (min eigenvalue " +
                                 std::to_string(min_ev) + ")",
                             min_ev);
    }

    GfDraw out;
    out.omega_l = llt.matrixL();
    out.nu.resize(i);
    for (Index k = 0; k + 1 < i; ++k) out.nu(k) = rng.normal();
    out.nu(i - 1) = rng.chi(gf_chi_dof(variant, i, j));
    // row * Omega_L = nu^T  <=>  Omega_L^T row^T = nu
    out.inv_last_row = out.omega_l.transpose().triangularView<Eigen::Upper>().solve(out.nu);
    const Matrix g_inv = lower_toeplitz_from_last_row(out.inv_last_row);
    out.g_f = g_inv.triangularView<Eigen::Lower>().solve(Matrix::Identity(i, i));
    return out;
}

GibbsEstimate run_gibbs(const HankelData& data, const Matrix& h_fp_hat, const Matrix& h_f_hat,
                        const GibbsConfig& config, Rng& rng) {
    if (config.rank < 1) throw DataError("run_gibbs: rank must be at least 1");
    if (config.n_burn < 1 || config.n_burn >= config.n_total)
        throw DataError("run_gibbs: need 1 <= N_o < N_F");

    GibbsState state = init_gibbs(h_fp_hat, h_f_hat, data, config.rank);
    GibbsEstimate est;
    est.rank_warning = state.rank_warning;
    Matrix sum = Matrix::Zero(h_fp_hat.rows(), h_fp_hat.cols());
    Index terms = 0;

    for (Index n = 2; n <= config.n_total; ++n) {
        const Matrix l_prev = state.l_p;
        GammaHfDraw gh = step_gamma_hf(state, data, rng, false);
        state.gamma_f = std::move(gh.gamma_f);
        state.h_f = std::move(gh.h_f);

        LpDraw lp = step_lp(state, data, rng, false);
        state.l_p = std::move(lp.l_p);
        state.x_p = state.l_p * data.z_p;

        const Matrix residues =
            data.y_f - state.gamma_f * state.x_p - state.h_f * data.u_f;
        state.g_f = step_gf(residues, rng, config.gf_variant).g_f;

        const Matrix product = state.gamma_f * state.l_p;
        if (!product.allFinite() || !state.g_f.allFinite())
            throw NumericalError("run_gibbs: chain diverged at iteration " + std::to_string(n),
                                 static_cast<double>(n));
        est.chain_norms.push_back(product.norm());
        if (n > config.n_burn) {
            if (config.rao_blackwell)
                sum += 0.5 * (gh.gamma_mean * l_prev + state.gamma_f * lp.l_p_mean);
            else
                sum += product;
            ++terms;
        }
    }
    est.h_fp_bayes = sum / static_cast<double>(terms);
    return est;
}

}  // namespace robsid
