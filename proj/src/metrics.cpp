#include "regscore/metrics.hpp"

#include <string>

#include "regscore/error.hpp"

namespace regscore {

ConfusionCounts confusion(std::span<const int> preds, std::span<const int> truth) {
    if (preds.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(preds.size()) + " predictions for " +
                                                   std::to_string(truth.size()) + " labels");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == 1, t = truth[i] == 1;
        if (p && t) ++c.tp;
        else if (!p && !t) ++c.tn;
        else if (p) ++c.fp;
        else ++c.fn;
    }
    return c;
}

Metrics metrics_from_confusion(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error(ErrorCode::EmptyEvaluation, "metrics over zero rows");
    Metrics m;
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    m.accuracy = d(c.tp + c.tn) / d(c.total());
    if (c.tp + c.fp > 0) m.precision = d(c.tp) / d(c.tp + c.fp);
    else m.precision_degenerate = true;
    if (c.tp + c.fn > 0) m.recall = d(c.tp) / d(c.tp + c.fn);
    else m.recall_degenerate = true;
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else m.f1_degenerate = true;
    return m;
}

}  // namespace regscore
