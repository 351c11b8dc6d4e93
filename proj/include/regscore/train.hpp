#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "regscore/dataset.hpp"
#include "regscore/fusion.hpp"
#include "regscore/metrics.hpp"

namespace regscore {

struct Hyperparams {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 20;
    std::size_t early_stop_patience = 5;  ///< epochs without a val-F1 improvement
    std::uint64_t seed = 0;

    /// Throws Error{InvalidConfig}.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    Metrics val;
};

/// One JSON object per line: epoch, train_loss, val_accuracy, val_precision, val_recall, val_f1.
std::string to_json_line(const EpochRecord& r);

struct TrainOptions {
    MlpConfig mlp;
    EncoderConfig encoder;
    SimilarityMode similarity = SimilarityMode::paper;
    double threshold = 0.5;
    /// Called after each epoch (progress reporting); may be empty.
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    FusionModel model;  ///< snapshot from the best-val-F1 epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  ///< 0 when no epoch ran
};

/// Adam over softmax cross-entropy with seeded per-epoch shuffling. Feature
/// stats are taken from `train.stats` and stored in the model.
/// Throws Error{Diverged} if the loss becomes non-finite.
TrainResult train_model(ModelMode mode, const Dataset& train, const Dataset& val, const Hyperparams& hp,
                        const TrainOptions& options = {});

/// Eval-mode predictions (0/1) at `threshold`, in dataset order.
std::vector<int> predict_labels(const FusionModel& m, const Dataset& ds, double threshold);
Metrics evaluate(const FusionModel& m, const Dataset& ds);

}  // namespace regscore
