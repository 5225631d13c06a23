#pragma once

// Ground-truth linear systems: random generation, steady-state Kalman gain,
// simulation, and the exact structured matrices used for risk evaluation.

#include "robsid/linalg.hpp"
#include "robsid/random.hpp"

namespace robsid {

/// x[k+1] = A x[k] + B u[k] + w[k],  y[k] = C x[k] + D u[k] + v[k],
/// with w ~ N(0, r_w), v ~ N(0, r_v). `k` and `sigma` are the steady-state
/// Kalman gain and innovations covariance of the equivalent innovation form.
struct StateSpaceModel {
    Matrix a;
    Matrix b;
    Matrix c;
    Matrix d;
    Matrix k;
    Matrix sigma;
    Matrix r_w;
    Matrix r_v;

    Index n_x() const { return a.rows(); }
    Index n_i() const { return b.cols(); }
    Index n_o() const { return c.rows(); }
};

/// Random-system protocol parameters.
struct SystemSpec {
    int nx_min = 1;
    int nx_max = 10;
    Index n_i = 1;
    Index n_o = 1;
    double snr_log10_min = -1.0;
    double snr_log10_max = 2.0;
    int max_retries = 100;
};

struct SampledSystem {
    StateSpaceModel model;
    double snr = 1.0;
    Index n = 0;        ///< sample size floor(80 sqrt(n_x))
    Index horizon = 0;  ///< Hankel row length floor(n / 10)
};

SampledSystem sample_system(const SystemSpec& spec, Rng& rng);

/// Sample size and horizon rules of the benchmark protocol.
Index protocol_sample_size(Index n_x);
Index protocol_horizon(Index sample_size);

struct KalmanSolution {
    Matrix k;
    Matrix sigma;
    Matrix p;
    int iterations = 0;
};

/// Steady-state Kalman gain by fixed-point iteration of the Riccati
/// recursion until ||dP||_F <= 1e-12 ||P||_F. Throws NumericalError (value =
/// last relative residual) after 10000 iterations.
KalmanSolution kalman_gain(const Matrix& a, const Matrix& c, const Matrix& r_w,
                           const Matrix& r_v);

/// 10 * ceil(1 / (1 - rho(A))), capped at 10^4.
Index default_burn_in(const StateSpaceModel& model);

/// Simulate the standard-form model from x0 = 0. `inputs` holds one input
/// sample per column; the first `burn_in` steps are run but dropped, so the
/// result has inputs.cols() - burn_in columns aligned with
/// inputs.rightCols(inputs.cols() - burn_in).
Matrix simulate(const StateSpaceModel& model, const Matrix& inputs, Rng& rng, Index burn_in);

/// Exact structured matrices of the model for horizons (f, p).
struct TrueDecomposition {
    Matrix gamma_f;  ///< (f n_o) x n_x
    Matrix l_p;      ///< n_x x (p (n_i + n_o)), input block first
    Matrix h_fp;     ///< gamma_f * l_p
    Matrix h_f;      ///< block lower Toeplitz of {D, CB, CAB, ...}
    Matrix g_f;      ///< block lower Toeplitz of {I, CK, CAK, ...} (I_f x Sigma^1/2)
    Index f = 0;
    Index p = 0;
};

TrueDecomposition true_decomposition(const StateSpaceModel& model, Index f, Index p);

}  // namespace robsid
