#pragma once

#include <cstdint>
#include <vector>

#include "regscore/matrix.hpp"
#include "regscore/params.hpp"

namespace regscore {

inline constexpr double kBatchNormMomentum = 0.1;

/// Four hidden blocks (affine -> BatchNorm -> LeakyReLU -> Dropout) followed by
/// a plain affine output layer.
struct MlpConfig {
    std::size_t input_dim = 4;
    std::size_t output_dim = 2;
    std::vector<std::size_t> layer_widths{1024, 2056, 512, 16};
    double leaky_slope = 0.1;
    std::vector<double> dropout_ps{0.2, 0.2, 0.2, 0.3};
    /// Added to the batch variance. var(x-hat) = var / (var + eps), so this is
    /// kept tiny: FC1 columns under Glorot init can have batch variance ~1e-4.
    double bn_epsilon = 1e-10;
    std::uint64_t seed = 0;

    /// Throws Error{InvalidConfig}.
    void validate() const;
    std::size_t embedding_dim() const { return layer_widths.back(); }
};

struct DenseLayer {
    Matrix weight;  ///< fan_in x fan_out
    std::vector<double> bias;
};

struct BatchNormParams {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

struct MlpWeights {
    MlpConfig config;
    std::vector<DenseLayer> dense;      ///< hidden blocks then the output layer
    std::vector<BatchNormParams> norm;  ///< one per hidden block
};

/// Per hidden block, what backward needs.
struct HiddenCache {
    Matrix input;                 ///< block input
    Matrix normalized;            ///< BN output before gamma/beta (x-hat)
    Matrix pre_activation;        ///< gamma * x-hat + beta
    Matrix dropout_scale;         ///< 0 or 1/(1-p) per element; empty in eval
    std::vector<double> inv_std;  ///< 1/sqrt(var + eps) per feature
};

struct MlpActivations {
    Mode mode = Mode::eval;
    std::vector<HiddenCache> hidden;
    Matrix embedding;  ///< last hidden block output (post-dropout in train)
    Matrix logits;
};

struct MlpGradients {
    std::vector<DenseLayer> dense;
    std::vector<std::vector<double>> gamma;
    std::vector<std::vector<double>> beta;
    Matrix input;  ///< gradient with respect to the batch input
};

/// Upstream gradients. Either may be empty (0 rows) when that output is unused.
struct MlpOutputGrad {
    Matrix logits;
    Matrix embedding;
};

/// Glorot-uniform weights, zero biases, gamma 1, beta 0, running stats (0, 1).
MlpWeights mlp_init(const MlpConfig& cfg);

/// Train mode uses batch statistics, folds them into the running stats and
/// applies inverted dropout keyed by `dropout_seed`. Eval mode is a pure
/// function of (weights, x).
MlpActivations mlp_forward(MlpWeights& w, const Matrix& x, Mode mode, std::uint64_t dropout_seed = 0);
MlpActivations mlp_forward(const MlpWeights& w, const Matrix& x);

/// Requires train-mode activations (Error{StaleActivations} otherwise).
MlpGradients mlp_backward(const MlpWeights& w, const MlpActivations& acts, const MlpOutputGrad& grad);

MlpGradients mlp_zero_gradients(const MlpWeights& w);

/// fc{k}.weight, fc{k}.bias, bn{k}.gamma, bn{k}.beta ... in a fixed order.
ParamList mlp_parameters(MlpWeights& w);
ParamList mlp_gradient_views(MlpGradients& g);

/// Zeroes entries with probability p, scales survivors by 1/(1-p). Writes the
/// per-element multiplier into `scale`.
void apply_dropout(Matrix& values, double p, std::uint64_t seed, Matrix& scale);

}  // namespace regscore
