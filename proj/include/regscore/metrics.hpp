#pragma once

#include <cstddef>
#include <span>

namespace regscore {

/// Positive class = malicious/suspicious (label 1).
struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t total() const noexcept { return tp + tn + fp + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Zero-denominator ratios are reported as 0 with the matching flag set.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
};

/// Throws Error{LengthMismatch}.
ConfusionCounts confusion(std::span<const int> preds, std::span<const int> truth);

/// Throws Error{EmptyEvaluation} when total() == 0.
Metrics metrics_from_confusion(const ConfusionCounts& c);

}  // namespace regscore
