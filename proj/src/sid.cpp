#include "robsid/sid.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "robsid/errors.hpp"
#include "robsid/shrinkage.hpp"

namespace robsid {

Matrix HankelData::regressor() const {
    Matrix r(z_p.rows() + u_f.rows(), n_cols);
    r << z_p, u_f;
    return r;
}

HankelData assemble(const Matrix& u, const Matrix& y, Index f, Index p) {
    if (u.cols() != y.cols())
        throw DataError("assemble: input and output sequences differ in length");
    if (f < 1 || p < 1) throw DataError("assemble: horizons must be positive");
    const Index t = y.cols();
    if (t < f + p)
        throw DataError("assemble: data too short (T=" + std::to_string(t) +
                        " < f+p=" + std::to_string(f + p) + ")");
    HankelData d;
    d.f = f;
    d.p = p;
    d.n_i = u.rows();
    d.n_o = y.rows();
    d.n_cols = t - f - p + 1;
    d.u_p = build_hankel(u, p, d.n_cols, 0);
    d.y_p = build_hankel(y, p, d.n_cols, 0);
    d.u_f = build_hankel(u, f, d.n_cols, p);
    d.y_f = build_hankel(y, f, d.n_cols, p);
    d.z_p.resize(d.u_p.rows() + d.y_p.rows(), d.n_cols);
    d.z_p << d.u_p, d.y_p;
    return d;
}

LsEstimate ls_estimate(const HankelData& data) {
    const Matrix reg = data.regressor();
    Eigen::BDCSVD<Matrix> svd(reg, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double s_max = s.size() > 0 ? s(0) : 0.0;
    const double s_min = s.size() == reg.rows() ? s(s.size() - 1) : 0.0;
    const double cond = s_min > 0.0 ? s_max / s_min : std::numeric_limits<double>::infinity();
    if (!(s_min > 1e-10 * s_max))
        throw NumericalError("ls_estimate: regressor [Z_p; U_f] is rank deficient (condition " +
                                 std::to_string(cond) + ")",
                             cond);
    const Matrix theta =
        data.y_f * svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    LsEstimate ls;
    ls.h_fp_hat = theta.leftCols(data.z_p.rows());
    ls.h_f_hat = theta.rightCols(data.u_f.rows());
    ls.residues = compute_residues(data, ls.h_fp_hat, ls.h_f_hat);
    ls.condition = cond;
    return ls;
}

Matrix compute_residues(const HankelData& data, const Matrix& h_fp, const Matrix& h_f) {
    return data.y_f - h_fp * data.z_p - h_f * data.u_f;
}

double regression_dof(Index i, Index n_i, Index n_o, std::optional<Index> rank_used) {
    const double di = static_cast<double>(i);
    const double ni = static_cast<double>(n_i);
    const double no = static_cast<double>(n_o);
    if (!rank_used) return di * (no + 2.0 * ni);
    const double r = static_cast<double>(*rank_used);
    return di * ni + di * (ni + no) - (di * (ni + no) - (di + ni + no) * r + r * r);
}

NoiseEstimate estimate_noise(const HankelData& data, const Matrix& h_fp, const Matrix& h_f,
                             std::optional<Index> rank_used) {
    NoiseEstimate ne;
    ne.dof = regression_dof(data.f, data.n_i, data.n_o, rank_used);
    const double denom = static_cast<double>(data.n_cols) - ne.dof;
    if (denom <= 0.0)
        throw NumericalError("estimate_noise: not enough columns for the regression degrees of "
                             "freedom",
                             denom);
    const Matrix e = compute_residues(data, h_fp, h_f);
    ne.g_hat_sq = e * e.transpose() / denom;
    ne.g_f_hat = block_toeplitz_project(lower_cholesky_psd(ne.g_hat_sq), data.n_o);
    return ne;
}

Matrix project_out_rows(const Matrix& m, const Matrix& u) {
    Eigen::ColPivHouseholderQR<Matrix> qr(u.transpose());
    const Index rank = qr.rank();
    const Matrix q = Matrix(qr.householderQ()).leftCols(rank);
    return m - (m * q) * q.transpose();
}

Matrix projected_gram(const HankelData& data) {
    const Matrix zp_perp = project_out_rows(data.z_p, data.u_f);
    Matrix g = zp_perp * zp_perp.transpose();
    return 0.5 * (g + g.transpose());
}

std::string to_string(WeightScheme scheme) {
    switch (scheme) {
        case WeightScheme::identity: return "identity";
        case WeightScheme::cva: return "cva";
        case WeightScheme::n4sid: return "n4sid";
    }
    return "unknown";
}

WeightScheme parse_weight_scheme(const std::string& name) {
    if (name == "identity") return WeightScheme::identity;
    if (name == "cva") return WeightScheme::cva;
    if (name == "n4sid") return WeightScheme::n4sid;
    throw DataError("unknown weight scheme '" + name + "'");
}

WeightPair build_weights(WeightScheme scheme, const HankelData& data, const Matrix& g_f_hat) {
    WeightPair w;
    w.scheme = scheme;
    w.zp_gram = projected_gram(data);
    const Index rows = data.y_f.rows();
    const Index past = data.z_p.rows();
    switch (scheme) {
        case WeightScheme::identity:
            w.w1 = w.w1_inv = Matrix::Identity(rows, rows);
            w.w2 = w.w2_pinv = Matrix::Identity(past, past);
            break;
        case WeightScheme::cva: {
            const double scale = std::max(g_f_hat.diagonal().cwiseAbs().maxCoeff(), 1e-300);
            if (g_f_hat.diagonal().cwiseAbs().minCoeff() <= 1e-12 * scale)
                throw NumericalError("build_weights(cva): estimated G_f is singular");
            w.w1_inv = g_f_hat;
            w.w1 = g_f_hat.triangularView<Eigen::Lower>().solve(Matrix::Identity(rows, rows));
            try {
                w.w2 = psd_sqrt(w.zp_gram);
                w.w2_pinv = psd_sqrt(w.zp_gram, true);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string("build_weights(cva): Z_p Pi Z_p^T is singular: ") +
                                         e.what(),
                                     e.value());
            }
            break;
        }
        case WeightScheme::n4sid:
            w.w1 = w.w1_inv = Matrix::Identity(rows, rows);
            w.w2 = data.z_p;
            w.w2_pinv = pinv(data.z_p);
            break;
    }
    return w;
}

double noise_level(const WeightPair& weights, const Matrix& g_hat_sq) {
    Matrix inv_half;
    try {
        inv_half = psd_sqrt(weights.zp_gram, true);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("noise_level: singular Z_p Pi Z_p^T: ") + e.what(),
                             e.value());
    }
    const Matrix k = inv_half * weights.w2;
    const double past_factor = max_eigenvalue_symmetric(k * k.transpose());
    const double future_factor =
        max_eigenvalue_symmetric(weights.w1 * g_hat_sq * weights.w1.transpose());
    const double sigma = std::sqrt(std::max(past_factor * future_factor, 0.0));
    return std::max(sigma, 1e-12);
}

Vector weighted_singular_values(const Matrix& h, const WeightPair& weights) {
    Eigen::BDCSVD<Matrix> svd(weights.apply(h));
    return svd.singularValues();
}

Matrix truncate_estimate(const Matrix& h, const WeightPair& weights, Index r) {
    const Matrix x = weights.apply(h);
    const Index rmax = std::min(x.rows(), x.cols());
    if (r < 1 || r > rmax)
        throw DataError("truncate_estimate: rank " + std::to_string(r) + " outside [1, " +
                        std::to_string(rmax) + "]");
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix xr = svd.matrixU().leftCols(r) *
                      svd.singularValues().head(r).asDiagonal() *
                      svd.matrixV().leftCols(r).transpose();
    return weights.unapply(xr);
}

RankSelection rank_star(const LsEstimate& ls, const WeightPair& initial_weights,
                        const HankelData& data) {
    const Matrix x = initial_weights.apply(ls.h_fp_hat);
    const Index rmax = std::min(x.rows(), x.cols());
    RankSelection sel;
    for (Index r = 1; r <= rmax; ++r) {
        const Matrix truncated = truncate_estimate(ls.h_fp_hat, initial_weights, r);
        NoiseEstimate noise = estimate_noise(data, truncated, ls.h_f_hat, r);
        WeightPair weights = initial_weights.scheme == WeightScheme::cva
                                 ? build_weights(WeightScheme::cva, data, noise.g_f_hat)
                                 : initial_weights;
        const double sigma = noise_level(weights, noise.g_hat_sq);
        const Vector s = weighted_singular_values(ls.h_fp_hat, weights);
        const ShrinkageContext ctx = ShrinkageContext::make(x.rows(), x.cols(), sigma);
        const double lambda = threshold_values(ctx).soft;
        const Index above = (s.array() > lambda).count();

        sel.r_star = r;
        sel.noise = std::move(noise);
        sel.sigma_level = sigma;
        sel.weights = std::move(weights);
        if (above < r) return sel;
    }
    sel.exhausted = true;
    return sel;
}

namespace {

// Strict "S_l above the curve" test with a round-off margin in log space.
bool above_in_log(double log_s, double log_threshold) {
    return log_s - log_threshold > 1e-10 * (1.0 + std::abs(log_threshold));
}

}  // namespace

Index order_heuristic_neff(std::span<const double> singular_values, bool head_only) {
    std::vector<double> s;
    for (double v : singular_values)
        if (v > 0.0) s.push_back(v);
    if (s.size() < 3)
        throw DataError("order_heuristic_neff: need at least 3 positive singular values");
    const double sum = std::accumulate(s.begin(), s.end(), 0.0);
    const double sum_sq = std::inner_product(s.begin(), s.end(), s.begin(), 0.0);
    const Index n_eff = static_cast<Index>(std::floor(sum * sum / sum_sq));
    const Index fallback = std::max<Index>(n_eff, 1);
    const Index count = static_cast<Index>(s.size());

    // Ordinary least squares of ln S_l on l over l = n_eff + 1 .. count (1-based).
    const Index first = n_eff + 1;
    const Index points = count - first + 1;
    if (points < 2) return fallback;
    double ml = 0.0, my = 0.0;
    for (Index l = first; l <= count; ++l) {
        ml += static_cast<double>(l);
        my += std::log(s[l - 1]);
    }
    ml /= static_cast<double>(points);
    my /= static_cast<double>(points);
    double sxy = 0.0, sxx = 0.0;
    for (Index l = first; l <= count; ++l) {
        const double dl = static_cast<double>(l) - ml;
        sxy += dl * (std::log(s[l - 1]) - my);
        sxx += dl * dl;
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * ml;

    // head_only restricts the search to the points left out of the fit.
    const Index last = head_only ? n_eff : count;
    Index n_hat = 0;
    for (Index l = 1; l <= last; ++l)
        if (above_in_log(std::log(s[l - 1]), intercept + slope * static_cast<double>(l)))
            n_hat = l;
    return n_hat > 0 ? n_hat : fallback;
}

Index order_midpoint(std::span<const double> singular_values) {
    if (singular_values.empty() || !(singular_values.front() > 0.0))
        throw DataError("order_midpoint: leading singular value must be positive");
    double last = singular_values.back();
    if (!(last > 0.0)) {
        double smallest = singular_values.front();
        for (double v : singular_values)
            if (v > 0.0) smallest = std::min(smallest, v);
        last = smallest * 1e-3;
    }
    const double log_threshold = 0.5 * (std::log(singular_values.front()) + std::log(last));
    Index n_hat = 0;
    for (std::size_t l = 0; l < singular_values.size(); ++l)
        if (singular_values[l] > 0.0 && above_in_log(std::log(singular_values[l]), log_threshold))
            n_hat = static_cast<Index>(l) + 1;
    return std::max<Index>(n_hat, 1);
}

}  // namespace robsid
