#include "cocyclab/linalg.hpp"
#include "cocyclab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace cocyclab {

// ---------------------------------------------------------------------------
// parallel

namespace {
std::atomic<int> g_jobs{0};
}

void set_default_jobs(int jobs) { g_jobs = jobs < 0 ? 0 : jobs; }

int default_jobs()
{
    const int j = g_jobs.load();
    if (j > 0) {
        return j;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body)
{
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(default_jobs()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::size_t first_error_index = count;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < first_error_index) {
                    first_error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    pool.clear();
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

// ---------------------------------------------------------------------------
// linear algebra

Matrix ScaledMatrix::value() const
{
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out.data()[i] = std::ldexp(out.data()[i], static_cast<int>(exp2));
    }
    return out;
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

void multiply_left_rescaled(const Matrix& f, ScaledMatrix& acc, Matrix& scratch)
{
    scratch.noalias() = f * acc.m;
    acc.m.swap(scratch);
    const double big = max_abs(acc.m);
    if (big > kRescaleThreshold) {
        const int e = std::ilogb(big);
        for (Eigen::Index i = 0; i < acc.m.size(); ++i) {
            acc.m.data()[i] = std::ldexp(acc.m.data()[i], -e);
        }
        acc.exp2 += e;
    }
}

bool orthonormalize(Matrix& y, Vector& rdiag)
{
    const Eigen::Index d = y.cols();
    rdiag.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        auto col = y.col(j);
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index i = 0; i < j; ++i) {
                const double r = y.col(i).dot(col);
                col -= r * y.col(i);
            }
        }
        const double norm = col.norm();
        if (!(norm > 0.0) || !std::isfinite(norm) || norm < 1e-300) {
            return false;
        }
        col /= norm;
        rdiag[j] = norm;
    }
    return true;
}

bool orthonormalize(Matrix& y, Matrix& r)
{
    const Eigen::Index d = y.cols();
    r.setZero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        auto col = y.col(j);
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index i = 0; i < j; ++i) {
                const double p = y.col(i).dot(col);
                col -= p * y.col(i);
                r(i, j) += p;
            }
        }
        const double norm = col.norm();
        if (!(norm > 0.0) || !std::isfinite(norm) || norm < 1e-300) {
            return false;
        }
        col /= norm;
        r(j, j) = norm;
    }
    return true;
}

double operator_norm(const Matrix& a)
{
    if (a.rows() == 2 && a.cols() == 2) {
        // Normalized first: t * t overflows near the rescale threshold.
        const double scale = max_abs(a);
        if (!(scale > 0.0)) {
            return 0.0;
        }
        const double p = a(0, 0) / scale, q = a(0, 1) / scale, r = a(1, 0) / scale, s = a(1, 1) / scale;
        const double t = p * p + q * q + r * r + s * s;
        const double det = p * s - q * r;
        const double disc = std::sqrt(std::max(0.0, (t - 2.0 * det) * (t + 2.0 * det)));
        return scale * std::sqrt(0.5 * (t + disc));
    }
    return singular_values(a)(0);
}

Vector singular_values(const Matrix& a)
{
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues();
}

double min_singular_value(const Matrix& a)
{
    const Vector s = singular_values(a);
    return s.size() == 0 ? 0.0 : s(s.size() - 1);
}

std::vector<std::vector<int>> combinations(int n, int k)
{
    std::vector<std::vector<int>> out;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        idx[static_cast<std::size_t>(i)] = i;
    }
    if (k > n || k < 0) {
        return out;
    }
    for (;;) {
        out.push_back(idx);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) {
            --i;
        }
        if (i < 0) {
            return out;
        }
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) {
            idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
}

Matrix compound(const Matrix& a, int k)
{
    const auto sets = combinations(static_cast<int>(a.rows()), k);
    const auto n = static_cast<Eigen::Index>(sets.size());
    Matrix out(n, n);
    Matrix minor(k, k);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    minor(i, j) = a(sets[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)],
                                    sets[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)]);
                }
            }
            out(r, c) = k == 1 ? minor(0, 0) : minor.determinant();
        }
    }
    return out;
}

double relative_frobenius(const Matrix& a, const Matrix& b)
{
    const double denom = std::max(b.norm(), 1e-300);
    return (a - b).norm() / denom;
}

} // namespace cocyclab

// ---------------------------------------------------------------------------
// json helpers

#include "cocyclab/errors.hpp"
#include "cocyclab/json_io.hpp"

namespace cocyclab {

Matrix matrix_from_json(const nlohmann::json& j)
{
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw ValidationError("matrix: expected a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError("matrix: ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) {
                throw ValidationError("matrix: non-numeric entry");
            }
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

nlohmann::json matrix_to_json(const Matrix& m)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

nlohmann::json vector_to_json(const Vector& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

} // namespace cocyclab
