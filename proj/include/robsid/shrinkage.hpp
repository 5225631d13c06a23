#pragma once

// Singular-value shrinkage of a noisy low-rank matrix Y = X + sigma W,
// W with i.i.d. unit entries. All rules work on the i x j orientation with
// i <= j; wider-than-tall inputs are transposed internally.

#include <string>

#include "robsid/linalg.hpp"
#include "robsid/sid.hpp"

namespace robsid {

enum class ShrinkageMethod { hard, soft, optimal, sure };

std::string to_string(ShrinkageMethod method);

struct ShrinkageContext {
    Index i = 0;
    Index j = 0;
    double beta = 1.0;   ///< i / j
    double sigma = 0.0;
    bool transposed = false;

    /// Context for a rows x cols matrix.
    static ShrinkageContext make(Index rows, Index cols, double sigma);
};

struct Thresholds {
    double hard = 0.0;
    double soft = 0.0;  ///< also the bulk edge (1 + sqrt(beta)) sigma sqrt(j)
};

/// Asymptotically optimal hard and soft thresholds.
Thresholds threshold_values(const ShrinkageContext& ctx);

/// Apply the shrinkage rule element-wise to descending singular values.
Vector shrink_values(const Vector& s, const ShrinkageContext& ctx, ShrinkageMethod method);

/// Stein's unbiased risk estimate of soft thresholding at `lambda` for a
/// matrix with singular values `s` (i <= j).
///
/// Pairs with |s_k^2 - s_l^2| < 1e-12 s_k^2 are separated by a relative
/// jitter of 1e-9 before evaluating the cross term.
double sure_risk(const Vector& s, double lambda, double sigma, Index i, Index j);

/// Global minimizer of sure_risk over [0, s_1]. SURE is quadratic between
/// consecutive singular values, so the candidates are the breakpoints and
/// each piece's vertex. Ties go to the larger threshold.
double sure_select(const Vector& s, double sigma, Index i, Index j);

/// Shrink a matrix under white noise of level sigma.
Matrix shrink_matrix(const Matrix& y, double sigma, ShrinkageMethod method);

/// Shrink W1 h W2 and map the result back through the weights.
Matrix shrink_estimate(const Matrix& h, const WeightPair& weights, double sigma,
                       ShrinkageMethod method);

}  // namespace robsid
