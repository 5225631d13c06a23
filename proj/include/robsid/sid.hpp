#pragma once

// Classical subspace-identification pipeline: Hankel data assembly, least
// squares, noise shaping, weights, SVD truncation and order selection.

#include <optional>
#include <span>
#include <string>

#include "robsid/linalg.hpp"

namespace robsid {

/// Past/future Hankel blocks sharing one time origin.
///
/// Column c of every block corresponds to the "present" time k = p + c of
/// the source signals: u_p/y_p span k-p .. k-1 and u_f/y_f span
/// k .. k+f-1.
struct HankelData {
    Matrix y_f;
    Matrix u_f;
    Matrix u_p;
    Matrix y_p;
    Matrix z_p;  ///< [u_p; y_p]
    Index f = 0;
    Index p = 0;
    Index n_cols = 0;
    Index n_i = 0;
    Index n_o = 0;

    /// Stacked regressor [z_p; u_f].
    Matrix regressor() const;
};

/// `u` and `y` hold one sample per column and must have equal length
/// T >= f + p. The result has N = T - f - p + 1 columns.
HankelData assemble(const Matrix& u, const Matrix& y, Index f, Index p);

struct LsEstimate {
    Matrix h_fp_hat;
    Matrix h_f_hat;
    Matrix residues;
    double condition = 0.0;  ///< condition number of the stacked regressor
};

/// [H_fp H_f] = Y_f [Z_p; U_f]^+. Throws NumericalError carrying the
/// condition number when the regressor is rank deficient (smallest singular
/// value below 1e-10 of the largest).
LsEstimate ls_estimate(const HankelData& data);

/// Y_f - h_fp Z_p - h_f U_f.
Matrix compute_residues(const HankelData& data, const Matrix& h_fp, const Matrix& h_f);

/// Degrees of freedom of the regression, optionally adjusted for a rank-r
/// truncated H_fp. `i` is the future horizon.
double regression_dof(Index i, Index n_i, Index n_o, std::optional<Index> rank_used);

struct NoiseEstimate {
    Matrix g_hat_sq;  ///< estimate of G_f G_f^T
    Matrix g_f_hat;   ///< Toeplitz-projected lower Cholesky factor
    double dof = 0.0;
};

/// Residue covariance E E^T / (N - dof) and its Toeplitz square root.
/// Throws NumericalError when N <= dof.
NoiseEstimate estimate_noise(const HankelData& data, const Matrix& h_fp, const Matrix& h_f,
                             std::optional<Index> rank_used = std::nullopt);

/// m * (I - U^T (U U^T)^-1 U), applied through a QR factorization of U^T.
Matrix project_out_rows(const Matrix& m, const Matrix& u);

/// Z_p Pi_{U_f}^perp Z_p^T.
Matrix projected_gram(const HankelData& data);

enum class WeightScheme { identity, cva, n4sid };

std::string to_string(WeightScheme scheme);
WeightScheme parse_weight_scheme(const std::string& name);

/// Weight pair (W1, W2) together with the inverses needed to undo the
/// weighting. For the n4sid scheme W2 = Z_p is rectangular and its
/// Moore-Penrose pseudo-inverse is used.
struct WeightPair {
    WeightScheme scheme = WeightScheme::identity;
    Matrix w1;
    Matrix w2;
    Matrix w1_inv;
    Matrix w2_pinv;
    Matrix zp_gram;  ///< Z_p Pi^perp Z_p^T, kept for the noise level

    Matrix apply(const Matrix& h) const { return w1 * h * w2; }
    Matrix unapply(const Matrix& x) const { return w1_inv * x * w2_pinv; }
};

/// identity: W1 = I, W2 = I; cva: W1 = G_f^-1, W2 = (Z_p Pi Z_p^T)^1/2;
/// n4sid: W1 = I, W2 = Z_p.
WeightPair build_weights(WeightScheme scheme, const HankelData& data, const Matrix& g_f_hat);

/// Largest directional noise level of the weighted LS estimate:
/// sigma^2 = l_max(W2^T (Z_p Pi Z_p^T)^-1 W2) * l_max(W1 g_hat_sq W1^T).
/// The result is floored at 1e-12.
double noise_level(const WeightPair& weights, const Matrix& g_hat_sq);

/// Singular values of W1 h W2, descending.
Vector weighted_singular_values(const Matrix& h, const WeightPair& weights);

/// Rank-r truncation of W1 h W2, mapped back through the weights.
Matrix truncate_estimate(const Matrix& h, const WeightPair& weights, Index r);

struct RankSelection {
    Index r_star = 0;
    NoiseEstimate noise;    ///< G_f(r*) estimate
    double sigma_level = 0.0;
    WeightPair weights;     ///< weights rebuilt from G_f(r*)
    bool exhausted = false; ///< no r satisfied the rule; r_star is full rank
};

/// Smallest r such that fewer than r weighted singular values exceed the
/// soft threshold computed from the rank-r noise estimate. For the cva
/// scheme the weights are rebuilt from each G_f(r).
RankSelection rank_star(const LsEstimate& ls, const WeightPair& initial_weights,
                        const HankelData& data);

/// Order estimate from the effective number of singular values and a
/// log-linear fit of the tail. With `head_only` the largest l above the fitted
/// line is searched in 1..floor(n_eff) only; otherwise over all l.
Index order_heuristic_neff(std::span<const double> singular_values, bool head_only = false);

/// Order estimate with the geometric mean of the extreme singular values as
/// threshold.
Index order_midpoint(std::span<const double> singular_values);

}  // namespace robsid
