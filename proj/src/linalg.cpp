#include "robsid/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "robsid/errors.hpp"

namespace robsid {

Matrix build_hankel(const Matrix& signal, Index block_rows, Index cols, Index start) {
    if (block_rows < 1 || cols < 1 || start < 0)
        throw DataError("build_hankel: block_rows and cols must be positive");
    const Index needed = start + block_rows + cols - 1;
    if (signal.cols() < needed)
        throw DataError("build_hankel: insufficient samples (have " +
                        std::to_string(signal.cols()) + ", need " + std::to_string(needed) +
                        ")");
    const Index d = signal.rows();
    Matrix h(block_rows * d, cols);
    for (Index k = 0; k < block_rows; ++k)
        h.middleRows(k * d, d) = signal.middleCols(start + k, cols);
    return h;
}

SelectorPair build_selectors(Index i, Index n) {
    SelectorPair sel;
    sel.i = i;
    sel.n = n;
    sel.b_t = Matrix::Zero(i * i, i);
    for (Index c = 0; c < i; ++c)
        for (Index r = c; r < i; ++r) sel.b_t(r + c * i, i - 1 - (r - c)) = 1.0;
    sel.b_w = Matrix::Zero(i * n, i + n - 1);
    for (Index c = 0; c < n; ++c)
        for (Index r = 0; r < i; ++r) sel.b_w(r + c * i, r + c) = 1.0;
    return sel;
}

Matrix psd_sqrt(const Matrix& m, bool inverse) {
    if (m.rows() != m.cols()) throw DataError("psd_sqrt: matrix is not square");
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw NumericalError("psd_sqrt: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
    Vector ev = eig.eigenvalues();
    const double largest = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    if (inverse) {
        const double min_ev = ev.minCoeff();
        if (min_ev <= 1e-14 * largest || min_ev <= 0.0)
            throw NumericalError("psd_sqrt: matrix is not positive definite", min_ev);
        ev = ev.cwiseSqrt().cwiseInverse();
    } else {
        ev = ev.cwiseMax(0.0).cwiseSqrt();
    }
    const Matrix& q = eig.eigenvectors();
    Matrix s = q * ev.asDiagonal() * q.transpose();
    return 0.5 * (s + s.transpose());
}

double pseudo_det(const Matrix& m, double tol) {
    if (m.size() == 0) return 1.0;
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 1.0;
    double det = 1.0;
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) > tol * s(0)) det *= s(k);
    return det;
}

Matrix toeplitz_project(const Matrix& m) {
    if (m.rows() != m.cols()) throw DataError("toeplitz_project: matrix is not square");
    const Index n = m.rows();
    Vector column(n);
    for (Index k = 0; k < n; ++k) column(k) = m.diagonal(-k).mean();
    return lower_toeplitz_from_column(column);
}

Matrix block_toeplitz_project(const Matrix& m, Index block) {
    if (block == 1) return toeplitz_project(m);
    if (m.rows() != m.cols() || block < 1 || m.rows() % block != 0)
        throw DataError("block_toeplitz_project: shape is not a multiple of the block size");
    const Index n = m.rows() / block;
    std::vector<Matrix> blocks;
    for (Index k = 0; k < n; ++k) {
        Matrix mean = Matrix::Zero(block, block);
        for (Index c = 0; c + k < n; ++c) mean += m.block((c + k) * block, c * block, block, block);
        blocks.push_back(mean / static_cast<double>(n - k));
    }
    return block_lower_toeplitz(blocks);
}

Matrix lower_toeplitz_from_column(const Vector& column) {
    const Index n = column.size();
    Matrix t = Matrix::Zero(n, n);
    for (Index c = 0; c < n; ++c) t.col(c).tail(n - c) = column.head(n - c);
    return t;
}

Matrix lower_toeplitz_from_last_row(const Vector& last_row) {
    return lower_toeplitz_from_column(last_row.reverse());
}

Matrix block_lower_toeplitz(const std::vector<Matrix>& blocks) {
    if (blocks.empty()) return Matrix();
    const Index br = blocks.front().rows();
    const Index bc = blocks.front().cols();
    const Index n = static_cast<Index>(blocks.size());
    Matrix t = Matrix::Zero(n * br, n * bc);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c <= r; ++c) t.block(r * br, c * bc, br, bc) = blocks[r - c];
    return t;
}

Matrix pinv(const Matrix& m, double rel_tol) {
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Vector s_inv = Vector::Zero(s.size());
    const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) > cutoff) s_inv(k) = 1.0 / s(k);
    return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix lower_cholesky_psd(const Matrix& m) {
    const Index n = m.rows();
    Matrix l = Matrix::Zero(n, n);
    const double scale = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (Index j = 0; j < n; ++j) {
        double pivot = m(j, j) - l.row(j).head(j).squaredNorm();
        if (pivot <= 1e-14 * scale) continue;
        l(j, j) = std::sqrt(pivot);
        for (Index r = j + 1; r < n; ++r)
            l(r, j) = (m(r, j) - l.row(r).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    return l;
}

double spectral_radius(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double max_eigenvalue_symmetric(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()),
                                              Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

}  // namespace robsid
