#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "regscore/domain.hpp"
#include "regscore/encoder.hpp"
#include "regscore/matrix.hpp"
#include "regscore/mlp.hpp"
#include "regscore/params.hpp"
#include "regscore/similarity.hpp"

namespace regscore {

/// Which branches feed the decision.
///  - mlp_only:  FC5 logits of the MLP, no head
///  - nlp_only:  encoder embedding -> (d x 2) linear probe
///  - fused:     concat(encoder embedding, MLP 16-dim embedding) -> head
enum class ModelMode { mlp_only, nlp_only, fused };

std::string_view to_string(ModelMode mode);
/// Accepts "mlp", "nlp", "fused" (and the full enum names). Throws Error{InvalidConfig}.
ModelMode parse_model_mode(std::string_view text);

inline constexpr int kBenign = 0;
inline constexpr int kSuspicious = 1;

/// Linear classifier: logits = x W + b.
struct FusionHead {
    Matrix weight;  ///< in x 2
    std::vector<double> bias;
};

FusionHead head_init(std::size_t input_dim, std::uint64_t seed);

/// logits = concat(text_emb, num_emb) W + b. Either side may be empty (0 columns
/// and matching rows, or 0x0) when the mode does not use it.
/// Throws Error{DimMismatch}.
Matrix fuse_forward(const Matrix& text_emb, const Matrix& num_emb, const FusionHead& head);

struct FuseGradients {
    FusionHead head;
    Matrix text_emb;
    Matrix num_emb;
};

FuseGradients fuse_backward(const Matrix& text_emb, const Matrix& num_emb, const FusionHead& head,
                            const Matrix& grad_logits);

struct LossResult {
    double loss = 0.0;
    Matrix grad;  ///< (softmax - onehot) / batch
};

/// Mean softmax cross-entropy over a (batch x 2) logit matrix, log-sum-exp stabilized.
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels);

/// softmax(logits)[suspicious] for one two-class row.
double p_suspicious(std::span<const double> logits);

/// Per-feature z-score parameters, taken from the training partition.
struct FeatureStats {
    bool enabled = true;
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> stddev{1.0, 1.0, 1.0, 1.0};
};

/// Rows of (similarity, length, digits, specials), standardized when enabled.
Matrix feature_matrix(std::span<const FeatureRow> rows, const FeatureStats& stats);

struct Verdict {
    int label = kBenign;
    double p_suspicious = 0.0;
    std::array<double, 2> logits{};
};

std::string_view verdict_name(int label);

/// The trained artifact. Branches a mode does not use are left empty.
struct FusionModel {
    ModelMode mode = ModelMode::fused;
    MlpWeights mlp;
    EncoderWeights encoder;
    FusionHead head;
    FeatureStats stats;
    SimilarityMode similarity = SimilarityMode::paper;
    double threshold = 0.5;

    bool uses_mlp() const noexcept { return mode != ModelMode::nlp_only; }
    bool uses_encoder() const noexcept { return mode != ModelMode::mlp_only; }
};

FusionModel model_init(ModelMode mode, const MlpConfig& mlp_cfg, const EncoderConfig& enc_cfg, std::uint64_t seed);

/// Forward state kept for the backward pass.
struct ModelForward {
    Matrix logits;
    MlpActivations mlp;
    EncodeResult text;
};

/// `features` are already-standardized rows (see feature_matrix).
ModelForward model_forward(FusionModel& m, std::span<const DomainName> domains, const Matrix& features, Mode mode,
                           std::uint64_t dropout_seed = 0);
/// Eval only; safe to call concurrently on a shared model.
Matrix model_logits(const FusionModel& m, std::span<const DomainName> domains, const Matrix& features);

struct ModelGradients {
    MlpGradients mlp;
    EncoderGradients encoder;
    FusionHead head;
};

ModelGradients model_backward(const FusionModel& m, const ModelForward& fwd, const Matrix& grad_logits);

/// Learnable tensors of the branches in use: MLP, then encoder, then head.
ParamList model_parameters(FusionModel& m);
ParamList model_gradient_views(ModelGradients& g);

/// Eval-mode verdicts. `features` are raw (unstandardized).
std::vector<Verdict> predict_batch(const FusionModel& m, std::span<const DomainName> domains,
                                   std::span<const FeatureRow> features, double threshold);
Verdict predict(const FusionModel& m, const DomainName& domain, const FeatureRow& features, double threshold);

}  // namespace regscore
