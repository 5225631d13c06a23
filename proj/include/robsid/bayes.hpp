#pragma once

// Bayesian alternating-least-squares estimate of H_fp for SISO data.
//
// The model factors H_fp Z_p = Gamma_f X_p with X_p = L_p Z_p, and the
// noise shaping G_f is lower-triangular Toeplitz with a prior invariant
// under that group. A Gibbs sampler alternates
//   (Gamma_f, H_f) | X_p, G_f   -- row-wise ridge regressions
//   L_p | Gamma_f, H_f, G_f     -- column-wise generalized ridge regressions
//   G_f | residues              -- last row of G_f^-1 via a Cholesky change
//                                  of variables
// and averages Gamma_f L_p along the chain.

#include <cstdint>
#include <string>
#include <vector>

#include "robsid/linalg.hpp"
#include "robsid/random.hpp"
#include "robsid/sid.hpp"

namespace robsid {

enum class GfVariant { hankel_exact, independent };

std::string to_string(GfVariant variant);
GfVariant parse_gf_variant(const std::string& name);

struct GibbsConfig {
    Index n_total = 250;  ///< N_F
    Index n_burn = 1;     ///< N_o, averaging runs over n in (N_o, N_F]
    Index rank = 0;       ///< 0: chosen by the caller (rank_star)
    GfVariant gf_variant = GfVariant::independent;
    bool rao_blackwell = true;
};

struct GibbsState {
    Matrix gamma_f;       ///< i x r
    Matrix h_f;           ///< i x i lower-triangular Toeplitz
    Matrix l_p;           ///< r x 2p
    Matrix x_p;           ///< l_p * Z_p
    Matrix g_f;           ///< i x i lower-triangular Toeplitz
    Matrix lambda_gamma;  ///< diag(i / S_r)
    Matrix lambda_h;      ///< I i^2 / tr(H_f^T H_f)
    Matrix lambda_l;      ///< diag(j / S_r)
    Matrix zp_pinv;       ///< Z_p^+, fixed
    bool rank_warning = false;

    double gamma_scalar() const;  ///< 1 / G_f(0,0)^2
    Matrix g_bar() const;         ///< G_f / G_f(0,0)
    Matrix sigma_e() const;       ///< G_f G_f^T
};

/// Empirical-prior initialization from the truncated SVD of h_fp_hat Z_p.
/// Throws UnsupportedError for non-SISO data.
GibbsState init_gibbs(const Matrix& h_fp_hat, const Matrix& h_f_hat, const HankelData& data,
                      Index rank);

struct GammaHfDraw {
    Matrix gamma_f;
    Matrix h_f;
    Matrix gamma_mean;  ///< conditional posterior mean of Gamma_f
    Matrix h_f_mean;
};

/// (Gamma_f, H_f) | X_p, G_f. With `deterministic` the noise term is
/// dropped and the draw equals the conditional mean.
GammaHfDraw step_gamma_hf(const GibbsState& state, const HankelData& data, Rng& rng,
                          bool deterministic);

struct LpDraw {
    Matrix l_p;
    Matrix l_p_mean;
};

/// L_p | Gamma_f, H_f, G_f, using the state's current Gamma_f and H_f.
LpDraw step_lp(const GibbsState& state, const HankelData& data, Rng& rng, bool deterministic);

/// Posterior quadratic form Omega of the last row of G_f^-1 given residues.
Matrix gf_posterior_omega(const Matrix& residues, GfVariant variant);

/// Chi degrees of freedom of nu_i for an i x j residue matrix.
double gf_chi_dof(GfVariant variant, Index i, Index j);

struct GfDraw {
    Matrix g_f;
    Vector inv_last_row;  ///< last row of G_f^-1
    Vector nu;
    Matrix omega_l;       ///< lower Cholesky factor of Omega
};

/// G_f | residues. Throws NumericalError (value = min eigenvalue) when
/// Omega is not positive definite.
GfDraw step_gf(const Matrix& residues, Rng& rng, GfVariant variant);

struct GibbsEstimate {
    Matrix h_fp_bayes;
    std::vector<double> chain_norms;  ///< ||Gamma_f L_p||_F per sweep
    bool rank_warning = false;
};

GibbsEstimate run_gibbs(const HankelData& data, const Matrix& h_fp_hat, const Matrix& h_f_hat,
                        const GibbsConfig& config, Rng& rng);

}  // namespace robsid
