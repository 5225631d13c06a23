#include "robsid/lti.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <vector>

#include "robsid/errors.hpp"

namespace robsid {

Index protocol_sample_size(Index n_x) {
    return static_cast<Index>(std::floor(80.0 * std::sqrt(static_cast<double>(n_x))));
}

Index protocol_horizon(Index sample_size) { return sample_size / 10; }

KalmanSolution kalman_gain(const Matrix& a, const Matrix& c, const Matrix& r_w,
                           const Matrix& r_v) {
    constexpr int kMaxIterations = 10000;
    const Index nx = a.rows();
    Matrix p = Matrix::Zero(nx, nx);
    double residual = 0.0;
    for (int it = 1; it <= kMaxIterations; ++it) {
        const Matrix s = c * p * c.transpose() + r_v;
        const Matrix apc = a * p * c.transpose();
        Matrix next = a * p * a.transpose() - apc * s.ldlt().solve(apc.transpose()) + r_w;
        next = 0.5 * (next + next.transpose());
        const double delta = (next - p).norm();
        const double size = next.norm();
        residual = size > 0.0 ? delta / size : delta;
        p = std::move(next);
        if (delta <= 1e-12 * size) {
            KalmanSolution sol;
            sol.p = p;
            sol.sigma = c * p * c.transpose() + r_v;
            sol.sigma = 0.5 * (sol.sigma + sol.sigma.transpose());
            sol.k = (sol.sigma.ldlt().solve(c * p * a.transpose())).transpose();
            sol.iterations = it;
            return sol;
        }
    }
    throw NumericalError("kalman_gain: Riccati iteration did not converge", residual);
}

SampledSystem sample_system(const SystemSpec& spec, Rng& rng) {
    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
        const int nx = rng.uniform_int(spec.nx_min, spec.nx_max);
        const Matrix a_aux = rng.normal_matrix(nx, nx);
        const double lambda_a = rng.uniform();
        const Matrix b = rng.normal_matrix(nx, spec.n_i);
        const Matrix c = rng.normal_matrix(spec.n_o, nx);
        const Matrix rv_half = rng.normal_matrix(spec.n_o, spec.n_o);
        const Matrix rw_half = rng.normal_matrix(nx, nx);
        const double snr =
            std::pow(10.0, rng.uniform(spec.snr_log10_min, spec.snr_log10_max));

        const double rho_aux = spectral_radius(a_aux);
        if (rho_aux < 1e-8 || lambda_a <= 0.0) continue;

        StateSpaceModel m;
        m.a = a_aux / rho_aux * lambda_a;
        m.b = b;
        m.c = c;
        m.d = Matrix::Zero(spec.n_o, spec.n_i);
        m.r_v = rv_half * rv_half.transpose();
        m.r_w = rw_half * rw_half.transpose();
        if (m.r_v.ldlt().rcond() < 1e-12) continue;
        try {
            KalmanSolution kf = kalman_gain(m.a, m.c, m.r_w, m.r_v);
            m.k = std::move(kf.k);
            m.sigma = std::move(kf.sigma);
        } catch (const NumericalError&) {
            continue;
        }
        if (spectral_radius(m.a - m.k * m.c) >= 1.0) continue;

        SampledSystem out;
        out.model = std::move(m);
        out.snr = snr;
        out.n = protocol_sample_size(nx);
        out.horizon = protocol_horizon(out.n);
        return out;
    }
    throw NumericalError("sample_system: exceeded retry budget",
                         static_cast<double>(spec.max_retries));
}

Index default_burn_in(const StateSpaceModel& model) {
    const double rho = spectral_radius(model.a);
    if (rho >= 1.0) return 10000;
    const double steps = 10.0 * std::ceil(1.0 / (1.0 - rho));
    return static_cast<Index>(std::min(steps, 10000.0));
}

Matrix simulate(const StateSpaceModel& model, const Matrix& inputs, Rng& rng, Index burn_in) {
    const Index total = inputs.cols();
    if (burn_in < 0 || burn_in > total)
        throw DataError("simulate: burn-in exceeds the input length");
    const Matrix w_half = psd_sqrt(model.r_w);
    const Matrix v_half = psd_sqrt(model.r_v);
    const Index nx = model.n_x();
    const Index no = model.n_o();

    Matrix outputs(no, total - burn_in);
    Vector x = Vector::Zero(nx);
    Vector w(nx), v(no);
    for (Index t = 0; t < total; ++t) {
        for (Index r = 0; r < no; ++r) v(r) = rng.normal();
        for (Index r = 0; r < nx; ++r) w(r) = rng.normal();
        if (t >= burn_in)
            outputs.col(t - burn_in) = model.c * x + model.d * inputs.col(t) + v_half * v;
        x = model.a * x + model.b * inputs.col(t) + w_half * w;
    }
    return outputs;
}

TrueDecomposition true_decomposition(const StateSpaceModel& model, Index f, Index p) {
    const Index nx = model.n_x();
    const Index ni = model.n_i();
    const Index no = model.n_o();
    if (f < nx || p < nx)
        std::clog << "robsid: warning: horizons f=" << f << ", p=" << p
                  << " are below the state dimension " << nx << "\n";

    TrueDecomposition td;
    td.f = f;
    td.p = p;

    td.gamma_f.resize(f * no, nx);
    Matrix ca = model.c;
    for (Index r = 0; r < f; ++r) {
        td.gamma_f.middleRows(r * no, no) = ca;
        ca = ca * model.a;
    }

    const Matrix a_k = model.a - model.k * model.c;
    const Matrix b_k1 = model.b - model.k * model.d;
    const Matrix& b_k2 = model.k;
    td.l_p.resize(nx, p * (ni + no));
    Matrix pow = Matrix::Identity(nx, nx);  // A_K^(p-1-q), filled from the right
    for (Index q = p - 1; q >= 0; --q) {
        td.l_p.middleCols(q * ni, ni) = pow * b_k1;
        td.l_p.middleCols(p * ni + q * no, no) = pow * b_k2;
        pow = pow * a_k;
    }
    td.h_fp = td.gamma_f * td.l_p;

    std::vector<Matrix> h_blocks{model.d};
    std::vector<Matrix> g_blocks{Matrix::Identity(no, no)};
    for (Index r = 1; r < f; ++r) {
        const Matrix ca_pow = td.gamma_f.middleRows((r - 1) * no, no);
        h_blocks.push_back(ca_pow * model.b);
        g_blocks.push_back(ca_pow * model.k);
    }
    td.h_f = block_lower_toeplitz(h_blocks);
    const Matrix sigma_half = psd_sqrt(model.sigma);
    Matrix scale = Matrix::Zero(f * no, f * no);
    for (Index r = 0; r < f; ++r) scale.block(r * no, r * no, no, no) = sigma_half;
    td.g_f = block_lower_toeplitz(g_blocks) * scale;
    return td;
}

}  // namespace robsid
