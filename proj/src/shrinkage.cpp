#include "robsid/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "robsid/errors.hpp"

namespace robsid {

std::string to_string(ShrinkageMethod method) {
    switch (method) {
        case ShrinkageMethod::hard: return "hard";
        case ShrinkageMethod::soft: return "soft";
        case ShrinkageMethod::optimal: return "optimal";
        case ShrinkageMethod::sure: return "sure";
    }
    return "unknown";
}

ShrinkageContext ShrinkageContext::make(Index rows, Index cols, double sigma) {
    ShrinkageContext ctx;
    ctx.transposed = rows > cols;
    ctx.i = std::min(rows, cols);
    ctx.j = std::max(rows, cols);
    ctx.beta = static_cast<double>(ctx.i) / static_cast<double>(ctx.j);
    ctx.sigma = sigma;
    return ctx;
}

Thresholds threshold_values(const ShrinkageContext& ctx) {
    const double b = ctx.beta;
    const double scale = ctx.sigma * std::sqrt(static_cast<double>(ctx.j));
    Thresholds t;
    t.hard = std::sqrt(2.0 * (b + 1.0) + 8.0 * b / (b + 1.0 + std::sqrt(b * b + 14.0 * b + 1.0))) *
             scale;
    t.soft = (1.0 + std::sqrt(b)) * scale;
    return t;
}

namespace {

double optimal_shrink(double s, const ShrinkageContext& ctx, double bulk_edge) {
    if (!(s > bulk_edge) || s <= 0.0) return 0.0;
    const double s2j = ctx.sigma * ctx.sigma * static_cast<double>(ctx.j);
    const double a = s * s - (1.0 + ctx.beta) * s2j;
    const double radicand = a * a - 4.0 * ctx.beta * s2j * s2j;
    return std::sqrt(std::max(radicand, 0.0)) / s;
}

// Separates near-degenerate singular values so the SURE cross term is finite.
Vector separate_degenerate(const Vector& s) {
    Vector out = s;
    for (Index k = 1; k < out.size(); ++k) {
        for (Index l = 0; l < k; ++l) {
            const double sk2 = out(k) * out(k);
            const double sl2 = out(l) * out(l);
            if (std::abs(sk2 - sl2) < 1e-12 * std::max(sk2, sl2))
                out(k) *= 1.0 - 1e-9 * static_cast<double>(k - l);
        }
    }
    return out;
}

}  // namespace

Vector shrink_values(const Vector& s, const ShrinkageContext& ctx, ShrinkageMethod method) {
    const Thresholds t = threshold_values(ctx);
    Vector out(s.size());
    switch (method) {
        case ShrinkageMethod::hard:
            for (Index k = 0; k < s.size(); ++k) out(k) = s(k) > t.hard ? s(k) : 0.0;
            break;
        case ShrinkageMethod::soft:
            out = (s.array() - t.soft).cwiseMax(0.0);
            break;
        case ShrinkageMethod::optimal:
            for (Index k = 0; k < s.size(); ++k) out(k) = optimal_shrink(s(k), ctx, t.soft);
            break;
        case ShrinkageMethod::sure: {
            const double lambda = sure_select(s, ctx.sigma, ctx.i, ctx.j);
            out = (s.array() - lambda).cwiseMax(0.0);
            break;
        }
    }
    return out;
}

double sure_risk(const Vector& s_in, double lambda, double sigma, Index i, Index j) {
    const Vector s = separate_degenerate(s_in);
    const double s2 = sigma * sigma;
    const double ij = static_cast<double>(i) * static_cast<double>(j);
    double risk = -ij * s2;
    double divergence = 0.0;
    for (Index k = 0; k < s.size(); ++k) {
        const double sk = s(k);
        risk += std::min(lambda * lambda, sk * sk);
        if (sk > lambda) {
            divergence += 1.0 + static_cast<double>(j - i) * (1.0 - lambda / sk);
            double cross = 0.0;
            for (Index l = 0; l < s.size(); ++l)
                if (l != k) cross += sk * (sk - lambda) / (sk * sk - s(l) * s(l));
            // Ordered pairs, each counted twice (real-valued SVT divergence).
            divergence += 2.0 * cross;
        }
    }
    return risk + 2.0 * s2 * divergence;
}

double sure_select(const Vector& s, double sigma, Index i, Index j) {
    if (s.size() == 0 || s(0) <= 0.0) return 0.0;
    std::vector<double> knots{0.0};
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) > 0.0 && s(k) <= s(0)) knots.push_back(s(k));
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    std::vector<double> candidates = knots;
    for (std::size_t q = 0; q + 1 < knots.size(); ++q) {
        const double lo = knots[q];
        const double hi = knots[q + 1];
        if (!(hi > lo)) continue;
        // Exact quadratic through three points of the piece; the interior
        // evaluation points avoid the breakpoints where the active set jumps.
        const double x0 = lo + 0.25 * (hi - lo);
        const double x1 = lo + 0.5 * (hi - lo);
        const double x2 = lo + 0.75 * (hi - lo);
        const double f0 = sure_risk(s, x0, sigma, i, j);
        const double f1 = sure_risk(s, x1, sigma, i, j);
        const double f2 = sure_risk(s, x2, sigma, i, j);
        const double h = x1 - x0;
        const double curvature = (f2 - 2.0 * f1 + f0) / (h * h);
        if (curvature <= 0.0) continue;
        const double slope = (f2 - f0) / (2.0 * h);
        const double vertex = x1 - slope / curvature;
        if (vertex > lo && vertex < hi) candidates.push_back(vertex);
    }

    double best_lambda = candidates.front();
    double best_risk = sure_risk(s, best_lambda, sigma, i, j);
    for (double lambda : candidates) {
        const double r = sure_risk(s, lambda, sigma, i, j);
        if (r < best_risk || (r == best_risk && lambda > best_lambda)) {
            best_risk = r;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

Matrix shrink_matrix(const Matrix& y, double sigma, ShrinkageMethod method) {
    const ShrinkageContext ctx = ShrinkageContext::make(y.rows(), y.cols(), sigma);
    const Matrix oriented = ctx.transposed ? Matrix(y.transpose()) : y;
    Eigen::BDCSVD<Matrix> svd(oriented, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector shrunk = shrink_values(svd.singularValues(), ctx, method);
    Matrix x = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    if (ctx.transposed) x.transposeInPlace();
    return x;
}

Matrix shrink_estimate(const Matrix& h, const WeightPair& weights, double sigma,
                       ShrinkageMethod method) {
    return weights.unapply(shrink_matrix(weights.apply(h), sigma, method));
}

}  // namespace robsid
