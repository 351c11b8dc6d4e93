#include "regscore/kernels.hpp"

#include <cassert>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace regscore::kernels {

namespace {

constexpr std::size_t kRowBlock = 4;

// Rows [i0, i0 + count) of c = a * b, count <= kRowBlock. Every output row is
// accumulated over k in ascending order regardless of `count`.
void matmul_rows(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i0, std::size_t count) {
    const std::size_t inner = a.cols();
    const std::size_t n = b.cols();
    double* c_rows[kRowBlock];
    for (std::size_t r = 0; r < count; ++r) {
        c_rows[r] = c.data() + (i0 + r) * n;
        std::fill(c_rows[r], c_rows[r] + n, 0.0);
    }
    if (count == kRowBlock) {
        double* __restrict c0 = c_rows[0];
        double* __restrict c1 = c_rows[1];
        double* __restrict c2 = c_rows[2];
        double* __restrict c3 = c_rows[3];
        for (std::size_t k = 0; k < inner; ++k) {
            const double* __restrict bk = b.data() + k * n;
            const double a0 = a(i0, k);
            const double a1 = a(i0 + 1, k);
            const double a2 = a(i0 + 2, k);
            const double a3 = a(i0 + 3, k);
            for (std::size_t j = 0; j < n; ++j) {
                const double bj = bk[j];
                c0[j] += a0 * bj;
                c1[j] += a1 * bj;
                c2[j] += a2 * bj;
                c3[j] += a3 * bj;
            }
        }
        return;
    }
    for (std::size_t r = 0; r < count; ++r) {
        double* __restrict cr = c_rows[r];
        for (std::size_t k = 0; k < inner; ++k) {
            const double* __restrict bk = b.data() + k * n;
            const double ak = a(i0 + r, k);
            for (std::size_t j = 0; j < n; ++j) cr[j] += ak * bk[j];
        }
    }
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& c, Exec exec) {
    assert(a.cols() == b.rows());
    if (c.rows() != a.rows() || c.cols() != b.cols()) c.resize(a.rows(), b.cols());
    const std::size_t m = a.rows();
    const auto blocks = static_cast<std::ptrdiff_t>((m + kRowBlock - 1) / kRowBlock);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
            const auto i0 = static_cast<std::size_t>(blk) * kRowBlock;
            matmul_rows(a, b, c, i0, std::min(kRowBlock, m - i0));
        }
    } else {
        for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
            const auto i0 = static_cast<std::size_t>(blk) * kRowBlock;
            matmul_rows(a, b, c, i0, std::min(kRowBlock, m - i0));
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, Exec exec) {
    matmul(transpose(a), b, c, exec);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, Exec exec) {
    matmul(a, transpose(b), c, exec);
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    constexpr std::size_t tile = 32;
    for (std::size_t i0 = 0; i0 < a.rows(); i0 += tile) {
        for (std::size_t j0 = 0; j0 < a.cols(); j0 += tile) {
            const std::size_t i1 = std::min(i0 + tile, a.rows());
            const std::size_t j1 = std::min(j0 + tile, a.cols());
            for (std::size_t i = i0; i < i1; ++i) {
                for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
            }
        }
    }
    return t;
}

void add_row_bias(Matrix& m, std::span<const double> bias) {
    assert(bias.size() == m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
}

void accumulate_column_sums(const Matrix& m, std::span<double> out) {
    assert(out.size() == m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace reference {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    assert(a.cols() == b.rows());
    c.resize(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    }
}

}  // namespace reference

}  // namespace regscore::kernels
