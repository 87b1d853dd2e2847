#pragma once

// SL_d models of G/P (complete flags) and G/A' (spanning line tuples).

#include "cocyclab/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace cocyclab {

/// Margin below which two flags are not in general position.
inline constexpr double kTransversalityThreshold = 1e-6;
/// |det| below which a line tuple does not span.
inline constexpr double kDegenerateDet = 1e-12;

/// Complete flag E_1 < ... < E_d stored as an orthonormal U with
/// E_j = span(U[:, :j]). Columns are canonicalized to a positive leading
/// entry, so equal flags have equal U up to rounding.
class Flag {
public:
    Flag() = default;
    /// Gram-Schmidt of `basis` in column order. Throws DegenerateTuple if
    /// the columns do not span.
    static Flag from_basis(const Matrix& basis);
    /// Takes an already orthonormal matrix as is (after canonicalization).
    static Flag from_orthonormal(Matrix u);

    static Flag standard(int d);
    /// (span e_d, span(e_d, e_{d-1}), ...).
    static Flag reversed(int d);

    int dim() const { return static_cast<int>(u_.cols()); }
    const Matrix& u() const { return u_; }
    /// Orthonormal basis of E_j, j in [0, d].
    Matrix subspace(int j) const { return u_.leftCols(j); }
    /// Unit vector spanning E_1.
    Vector line() const { return u_.col(0); }
    /// Unit normal of the hyperplane E_{d-1}.
    Vector hyperplane_normal() const { return u_.col(u_.cols() - 1); }

    nlohmann::json to_json() const;
    static Flag from_json(const nlohmann::json& j);

private:
    explicit Flag(Matrix u) : u_(std::move(u)) {}
    Matrix u_;
};

/// d lines spanning R^d, stored as unit column vectors with positive
/// leading entry.
class LineTuple {
public:
    LineTuple() = default;
    /// Normalizes the columns. Throws DegenerateTuple if |det| < 1e-12
    /// after normalization or a column vanishes.
    static LineTuple from_columns(const Matrix& v);

    /// Takes columns that are already unit vectors without rescaling them,
    /// so permuting the lines of a tuple is exact.
    static LineTuple from_unit_columns(Matrix v);
    static LineTuple standard(int d);

    int dim() const { return static_cast<int>(v_.cols()); }
    const Matrix& vectors() const { return v_; }
    Vector line(int j) const { return v_.col(j); }

    nlohmann::json to_json() const;
    static LineTuple from_json(const nlohmann::json& j);

private:
    explicit LineTuple(Matrix v) : v_(std::move(v)) {}
    Matrix v_;
};

/// (l_1, l_1+l_2, ..., R^d).
Flag pr1(const LineTuple& t);
/// (l_d, l_{d-1}+l_d, ..., R^d).
Flag pr2(const LineTuple& t);

/// Permutation of {0..d-1} in one-line notation: w[j] is the image of j.
using Permutation = std::vector<int>;

Permutation identity_permutation(int d);
/// j -> d-1-j.
Permutation w_long(int d);
/// (v o w)(j) = v(w(j)).
Permutation compose(const Permutation& v, const Permutation& w);

/// Line l_j moves to slot w(j): (w.t)_{w(j)} = t_j. This is a left action.
LineTuple weyl_act(const Permutation& w, const LineTuple& t);

struct GeneralPosition {
    bool transverse = false;
    double margin = 0.0;
};

/// E_j(f) meets E_{d-j}(g) trivially for all j. margin is the minimum over
/// j of the smallest singular value of [basis E_j(f), basis E_{d-j}(g)].
GeneralPosition general_position(const Flag& f, const Flag& g);

/// Max over j of the largest principal angle between E_j(f) and E_j(g).
double flag_distance(const Flag& f, const Flag& g);

/// l_j = E_j(f) meet E_{d-j+1}(g). Throws NotTransverse.
LineTuple tuple_from_flag_pair(const Flag& f, const Flag& g);

/// Induced actions of g in GL_d.
Flag act(const Matrix& g, const Flag& f);
LineTuple act(const Matrix& g, const LineTuple& t);

/// Largest / smallest principal angle between subspaces with orthonormal
/// bases a and b (columns).
double max_principal_angle(const Matrix& a, const Matrix& b);
double min_principal_angle(const Matrix& a, const Matrix& b);

/// Sine of the angle between the lines spanned by u and v.
double line_sine(const Vector& u, const Vector& v);

/// Sign-insensitive equality of tuples: max over j of line_sine.
double tuple_distance(const LineTuple& s, const LineTuple& t);

/// Haar-random orthonormal flag from a seeded Gaussian matrix.
Flag random_flag(int d, std::uint64_t seed);
/// Line tuple with i.i.d. Gaussian directions.
LineTuple random_tuple(int d, std::uint64_t seed);

} // namespace cocyclab
