#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "regscore/domain.hpp"
#include "regscore/kernels.hpp"
#include "regscore/matrix.hpp"
#include "regscore/mlp.hpp"
#include "regscore/params.hpp"

namespace regscore {

/// Byte-level vocabulary: UTF-8 bytes 0-255 plus PAD.
inline constexpr std::size_t kVocabSize = 257;
inline constexpr std::size_t kPadToken = 256;

struct EncoderConfig {
    std::size_t embed_dim = 32;
    std::size_t num_layers = 1;
    std::size_t num_heads = 2;
    std::size_t ffn_dim = 64;
    std::size_t max_len = 64;
    std::uint64_t seed = 0;

    /// Throws Error{InvalidConfig}.
    void validate() const;
};

struct EncoderLayerWeights {
    std::vector<double> ln1_gain, ln1_bias;
    DenseLayer query, key, value, output;
    std::vector<double> ln2_gain, ln2_bias;
    DenseLayer ffn_in, ffn_out;
};

/// Also used as the gradient container (positional table is never learned).
struct EncoderWeights {
    EncoderConfig config;
    Matrix embedding;   ///< kVocabSize x embed_dim
    Matrix positional;  ///< max_len x embed_dim, sinusoidal, fixed
    std::vector<EncoderLayerWeights> layers;
    std::vector<double> final_gain, final_bias;
};

using EncoderGradients = EncoderWeights;

struct EncoderExampleCache;

/// Activations retained by a train-mode encode for the backward pass.
struct EncoderCache {
    Mode mode = Mode::eval;
    std::vector<std::shared_ptr<const EncoderExampleCache>> examples;
};

struct EncodeResult {
    Matrix embedding;             ///< batch x embed_dim, mean-pooled
    std::vector<bool> truncated;  ///< input exceeded max_len bytes
    EncoderCache cache;           ///< empty in eval mode
};

EncoderWeights encoder_init(const EncoderConfig& cfg);
Matrix sinusoidal_positions(std::size_t max_len, std::size_t dim);

/// Each byte string is embedded, passed through the transformer layers and
/// mean-pooled over its own positions. Examples never interact, so a row's
/// output does not depend on the rest of the batch or on padding length.
/// Throws Error{EmptyBatch} / Error{EmptyDomain}.
EncodeResult encode_bytes(const EncoderWeights& w, std::span<const std::string> texts, Mode mode,
                          kernels::Exec exec = kernels::Exec::parallel);
EncodeResult encode_batch(const EncoderWeights& w, std::span<const DomainName> domains, Mode mode,
                          kernels::Exec exec = kernels::Exec::parallel);

/// Requires a train-mode cache (Error{StaleActivations} otherwise).
EncoderGradients encoder_backward(const EncoderWeights& w, const EncoderCache& cache, const Matrix& grad_out);

EncoderGradients encoder_zero_gradients(const EncoderWeights& w);

/// Learnable tensors only; works for weights and gradients alike.
ParamList encoder_parameters(EncoderWeights& w);

}  // namespace regscore
