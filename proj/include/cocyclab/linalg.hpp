#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace cocyclab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Matrix with a separate power-of-two scale: value() = m * 2^exp2.
/// Rescaling by powers of two is exact in binary floating point.
struct ScaledMatrix {
    Matrix m;
    long exp2 = 0;

    double log_scale() const { return static_cast<double>(exp2) * std::log(2.0); }
    Matrix value() const;
};

/// Entry magnitude above which running products are rescaled.
inline constexpr double kRescaleThreshold = 1e100;

/// Left-multiplies acc by f and rescales when an entry exceeds the threshold.
void multiply_left_rescaled(const Matrix& f, ScaledMatrix& acc, Matrix& scratch);

/// In-place modified Gram-Schmidt with one re-orthogonalization pass.
/// On return y holds Q and rdiag the (positive) diagonal of R.
/// Returns false if a column collapses (non-finite or vanishing norm).
bool orthonormalize(Matrix& y, Vector& rdiag);

/// Same as orthonormalize but also returns the full upper-triangular R.
bool orthonormalize(Matrix& y, Matrix& r);

/// Largest singular value. Closed form for 2x2, SVD otherwise.
double operator_norm(const Matrix& a);

/// Smallest singular value of a square or tall matrix.
double min_singular_value(const Matrix& a);

/// All singular values, non-increasing.
Vector singular_values(const Matrix& a);

/// k-th compound matrix (k x k minors, lexicographic index sets).
Matrix compound(const Matrix& a, int k);

/// Index sets used to label rows/columns of compound(., k).
std::vector<std::vector<int>> combinations(int n, int k);

double max_abs(const Matrix& a);

/// Relative Frobenius distance ||a - b|| / max(||b||, tiny).
double relative_frobenius(const Matrix& a, const Matrix& b);

} // namespace cocyclab
