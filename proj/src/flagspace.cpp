#include "cocyclab/flagspace.hpp"

#include "cocyclab/errors.hpp"
#include "cocyclab/json_io.hpp"
#include "cocyclab/random.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numeric>
#include <random>

namespace cocyclab {

namespace {

constexpr double kLeadingTolerance = 1e-12;

void canonicalize_columns(Matrix& m)
{
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (std::abs(m(r, c)) > kLeadingTolerance) {
                if (m(r, c) < 0.0) {
                    m.col(c) = -m.col(c);
                }
                break;
            }
        }
    }
}

Matrix gaussian_matrix(int d, std::uint64_t seed)
{
    CounterStream rng(seed);
    std::normal_distribution<double> normal;
    Matrix g(d, d);
    for (int c = 0; c < d; ++c) {
        for (int r = 0; r < d; ++r) {
            g(r, c) = normal(rng);
        }
    }
    return g;
}

} // namespace

// ---------------------------------------------------------------------------
// Flag

Flag Flag::from_basis(const Matrix& basis)
{
    if (basis.rows() != basis.cols() || basis.rows() < 1) {
        throw std::invalid_argument("flag basis must be square");
    }
    Matrix u = basis;
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        const double n = u.col(c).norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw DegenerateTuple("flag basis has a vanishing column");
        }
        u.col(c) /= n;
    }
    if (std::abs(u.determinant()) < kDegenerateDet) {
        throw DegenerateTuple("flag basis does not span");
    }
    Vector rdiag;
    if (!orthonormalize(u, rdiag)) {
        throw DegenerateTuple("flag basis collapsed under Gram-Schmidt");
    }
    canonicalize_columns(u);
    return Flag(std::move(u));
}

Flag Flag::from_orthonormal(Matrix u)
{
    canonicalize_columns(u);
    return Flag(std::move(u));
}

Flag Flag::standard(int d) { return Flag(Matrix::Identity(d, d)); }

Flag Flag::reversed(int d) { return Flag(Matrix::Identity(d, d).rowwise().reverse()); }

nlohmann::json Flag::to_json() const { return matrix_to_json(u_); }

Flag Flag::from_json(const nlohmann::json& j)
{
    const Matrix u = matrix_from_json(j);
    if (u.rows() != u.cols()) {
        throw ValidationError("flag must be a square matrix");
    }
    if ((u.transpose() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() > 1e-10) {
        throw ValidationError("flag matrix is not orthonormal");
    }
    return from_orthonormal(u);
}

// ---------------------------------------------------------------------------
// LineTuple

LineTuple LineTuple::from_columns(const Matrix& v)
{
    if (v.rows() != v.cols() || v.rows() < 1) {
        throw std::invalid_argument("line tuple must be square");
    }
    Matrix n = v;
    for (Eigen::Index c = 0; c < n.cols(); ++c) {
        const double len = n.col(c).norm();
        if (!(len > 0.0) || !std::isfinite(len)) {
            throw DegenerateTuple("line tuple has a vanishing vector");
        }
        n.col(c) /= len;
    }
    if (std::abs(n.determinant()) < kDegenerateDet) {
        throw DegenerateTuple("lines do not span R^d");
    }
    canonicalize_columns(n);
    return LineTuple(std::move(n));
}

LineTuple LineTuple::from_unit_columns(Matrix v)
{
    if (v.rows() != v.cols() || v.rows() < 1) {
        throw std::invalid_argument("line tuple must be square");
    }
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        if (!(std::abs(v.col(c).norm() - 1.0) < 1e-12)) {
            throw std::invalid_argument("from_unit_columns: column is not a unit vector");
        }
    }
    if (std::abs(v.determinant()) < kDegenerateDet) {
        throw DegenerateTuple("lines do not span R^d");
    }
    canonicalize_columns(v);
    return LineTuple(std::move(v));
}

LineTuple LineTuple::standard(int d) { return LineTuple(Matrix::Identity(d, d)); }

nlohmann::json LineTuple::to_json() const { return matrix_to_json(v_); }

LineTuple LineTuple::from_json(const nlohmann::json& j)
{
    try {
        return from_columns(matrix_from_json(j));
    } catch (const DegenerateTuple& e) {
        throw ValidationError(e.what());
    }
}

// ---------------------------------------------------------------------------
// projections and Weyl action

Flag pr1(const LineTuple& t) { return Flag::from_basis(t.vectors()); }

Flag pr2(const LineTuple& t) { return Flag::from_basis(t.vectors().rowwise().reverse()); }

Permutation identity_permutation(int d)
{
    Permutation p(static_cast<std::size_t>(d));
    std::iota(p.begin(), p.end(), 0);
    return p;
}

Permutation w_long(int d)
{
    Permutation p(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        p[static_cast<std::size_t>(j)] = d - 1 - j;
    }
    return p;
}

Permutation compose(const Permutation& v, const Permutation& w)
{
    if (v.size() != w.size()) {
        throw std::invalid_argument("compose: permutations of different degree");
    }
    Permutation out(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        out[j] = v.at(static_cast<std::size_t>(w[j]));
    }
    return out;
}

LineTuple weyl_act(const Permutation& w, const LineTuple& t)
{
    const int d = t.dim();
    if (static_cast<int>(w.size()) != d) {
        throw std::invalid_argument("weyl_act: permutation degree differs from tuple dimension");
    }
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    Matrix v(d, d);
    for (int j = 0; j < d; ++j) {
        const int target = w[static_cast<std::size_t>(j)];
        if (target < 0 || target >= d || seen[static_cast<std::size_t>(target)]) {
            throw std::invalid_argument("weyl_act: not a permutation");
        }
        seen[static_cast<std::size_t>(target)] = true;
        v.col(target) = t.vectors().col(j);
    }
    return LineTuple::from_unit_columns(std::move(v));
}

// ---------------------------------------------------------------------------
// geometry

double max_principal_angle(const Matrix& a, const Matrix& b)
{
    if (a.cols() == 0 || b.cols() == 0) {
        return 0.0;
    }
    if (a.cols() == 1 && b.cols() == 1) {
        return std::atan2(line_sine(a.col(0), b.col(0)), std::abs(a.col(0).dot(b.col(0))));
    }
    // Equal dimensions: sin = ||(I - P_a) b||, cos = sigma_min(a^T b).
    const Matrix c = a.transpose() * b;
    const double s = operator_norm(b - a * c);
    const double cs = min_singular_value(c);
    return std::atan2(s, cs);
}

double min_principal_angle(const Matrix& a, const Matrix& b)
{
    if (a.cols() == 0 || b.cols() == 0) {
        return M_PI / 2;
    }
    const Matrix c = a.transpose() * b;
    const double cs = std::min(1.0, operator_norm(c));
    // Smallest angle: sin = sigma_min over the best direction of the residual.
    const Matrix residual = b - a * c;
    const double s = b.cols() <= a.rows() - a.cols() ? min_singular_value(residual) : 0.0;
    return std::atan2(s, cs);
}

double line_sine(const Vector& u, const Vector& v)
{
    const Vector a = u.normalized();
    const Vector b = v.normalized();
    return (b - a.dot(b) * a).norm();
}

GeneralPosition general_position(const Flag& f, const Flag& g)
{
    const int d = f.dim();
    if (g.dim() != d) {
        throw std::invalid_argument("general_position: flags of different dimension");
    }
    double margin = 1.0;
    for (int j = 1; j < d; ++j) {
        Matrix stacked(d, d);
        stacked << f.subspace(j), g.subspace(d - j);
        margin = std::min(margin, min_singular_value(stacked));
    }
    return {margin > kTransversalityThreshold, margin};
}

double flag_distance(const Flag& f, const Flag& g)
{
    const int d = f.dim();
    if (g.dim() != d) {
        throw std::invalid_argument("flag_distance: flags of different dimension");
    }
    double dist = 0.0;
    for (int j = 1; j < d; ++j) {
        dist = std::max(dist, max_principal_angle(f.subspace(j), g.subspace(j)));
    }
    return dist;
}

LineTuple tuple_from_flag_pair(const Flag& f, const Flag& g)
{
    const auto gp = general_position(f, g);
    if (!gp.transverse) {
        throw NotTransverse("flags are not in general position (margin " + std::to_string(gp.margin) + ")");
    }
    const int d = f.dim();
    Matrix lines(d, d);
    for (int j = 1; j <= d; ++j) {
        // Vectors of E_j(f) orthogonal to E_{d-j+1}(g)^perp = span(U_g[:, d-j+1:]).
        const Matrix a = f.subspace(j);
        const Matrix perp = g.u().rightCols(j - 1);
        Vector coeff;
        if (j == 1) {
            coeff = Vector::Ones(1);
        } else {
            const Matrix m = perp.transpose() * a;
            Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
            coeff = svd.matrixV().col(j - 1);
        }
        lines.col(j - 1) = (a * coeff).normalized();
    }
    return LineTuple::from_columns(lines);
}

Flag act(const Matrix& g, const Flag& f) { return Flag::from_basis(g * f.u()); }

LineTuple act(const Matrix& g, const LineTuple& t) { return LineTuple::from_columns(g * t.vectors()); }

double tuple_distance(const LineTuple& s, const LineTuple& t)
{
    double worst = 0.0;
    for (int j = 0; j < s.dim(); ++j) {
        worst = std::max(worst, line_sine(s.line(j), t.line(j)));
    }
    return worst;
}

Flag random_flag(int d, std::uint64_t seed) { return Flag::from_basis(gaussian_matrix(d, seed)); }

LineTuple random_tuple(int d, std::uint64_t seed) { return LineTuple::from_columns(gaussian_matrix(d, seed)); }

} // namespace cocyclab
