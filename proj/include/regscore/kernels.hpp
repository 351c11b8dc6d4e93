#pragma once

#include "regscore/matrix.hpp"

namespace regscore::kernels {

/// Selects how the blocked kernels run. Both paths execute the same per-row
/// arithmetic, so results are bit-identical across thread counts.
enum class Exec { serial, parallel };

/// c = a * b. `c` is resized.
void matmul(const Matrix& a, const Matrix& b, Matrix& c, Exec exec = Exec::parallel);
/// c = a^T * b.
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, Exec exec = Exec::parallel);
/// c = a * b^T.
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, Exec exec = Exec::parallel);

Matrix transpose(const Matrix& a);

/// Adds `bias` (length cols) to every row of `m`.
void add_row_bias(Matrix& m, std::span<const double> bias);
/// out[j] += sum_i m(i, j)
void accumulate_column_sums(const Matrix& m, std::span<double> out);

int max_threads();

namespace reference {

/// Textbook triple loop; kept as the correctness baseline for the blocked kernels.
void matmul(const Matrix& a, const Matrix& b, Matrix& c);

}  // namespace reference

}  // namespace regscore::kernels
