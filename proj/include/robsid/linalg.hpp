#pragma once

// Structured-matrix utilities shared by the identification pipeline.
//
// Vectorization is column-major everywhere: vec(M) stacks the columns of M,
// which is also Eigen's default storage order, so vec(M) is simply
// Eigen::Map<const VectorXd>(M.data(), M.size()).

#include <vector>

#include <Eigen/Dense>

namespace robsid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Block Hankel matrix of a multichannel signal.
///
/// `signal` holds one d-dimensional sample per column. Block (k, l) of the
/// result is signal.col(start + k + l), giving a (block_rows * d) x cols
/// matrix. Throws DataError if fewer than start + block_rows + cols - 1
/// samples are available.
Matrix build_hankel(const Matrix& signal, Index block_rows, Index cols, Index start = 0);

/// 0/1 structural maps between low-dimensional parameterizations and
/// vectorized structured matrices.
///
///  - b_t (i^2 x i): vec(G) = b_t * g for a lower-triangular Toeplitz i x i
///    matrix G whose last row is g^T.
///  - b_w (i*n x (i+n-1)): vec(E) = b_w * e for the i x n Hankel matrix
///    E(r, c) = e(r + c).
struct SelectorPair {
    Matrix b_t;
    Matrix b_w;
    Index i = 0;
    Index n = 0;
};

SelectorPair build_selectors(Index i, Index n);

/// Symmetric square root of a symmetric PSD matrix (or of its inverse when
/// `inverse` is set). Negative eigenvalues are clipped to zero in the direct
/// case; the inverse case throws NumericalError unless the matrix is
/// positive definite.
Matrix psd_sqrt(const Matrix& m, bool inverse = false);

/// Product of the singular values exceeding tol * (largest singular value).
/// Returns 1 (empty product) for an all-zero matrix.
double pseudo_det(const Matrix& m, double tol = 1e-10);

/// Frobenius-nearest lower-triangular Toeplitz matrix: each subdiagonal is
/// replaced by the mean of its entries and the strict upper triangle is
/// zeroed.
Matrix toeplitz_project(const Matrix& m);

/// Block version of toeplitz_project for square blocks of size `block`:
/// every block subdiagonal is replaced by the mean of its blocks, and the
/// strictly upper block triangle is zeroed. block = 1 is toeplitz_project.
Matrix block_toeplitz_project(const Matrix& m, Index block);

/// Lower-triangular Toeplitz matrix with the given first column.
Matrix lower_toeplitz_from_column(const Vector& column);

/// Lower-triangular Toeplitz matrix with the given last row (ordered from
/// the first column to the diagonal).
Matrix lower_toeplitz_from_last_row(const Vector& last_row);

/// Block lower-triangular Toeplitz matrix with `blocks[k]` on the k-th block
/// subdiagonal. All blocks must share one shape.
Matrix block_lower_toeplitz(const std::vector<Matrix>& blocks);

/// Moore-Penrose pseudo-inverse; singular values below
/// rel_tol * (largest singular value) are treated as zero.
Matrix pinv(const Matrix& m, double rel_tol = 1e-10);

/// Lower Cholesky factor of a symmetric PSD matrix. Pivots that are not
/// positive (rank deficiency, round-off) zero out their column instead of
/// failing.
Matrix lower_cholesky_psd(const Matrix& m);

/// Largest eigenvalue modulus.
double spectral_radius(const Matrix& m);

/// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue_symmetric(const Matrix& m);

}  // namespace robsid
