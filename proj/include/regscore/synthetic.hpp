#pragma once

#include <cstdint>

#include "regscore/dataset.hpp"

namespace regscore {

/// Labels are a function of two numeric features: malicious iff the name has
/// at least one digit AND is longer than 20 characters. The four
/// (digit, long) combinations are drawn equally often. Similarity is noise.
Dataset make_separable_dataset(std::size_t n, std::uint64_t seed);

/// Malicious iff the name contains "xq". Both classes are built the same way
/// (random letters, optional hyphen and digits, one inserted letter pair), so
/// length, digit and special counts have identical distributions and the
/// similarity column is label-independent noise.
Dataset make_text_pattern_dataset(std::size_t n, std::uint64_t seed);

}  // namespace regscore
