#include "regscore/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "regscore/error.hpp"
#include "regscore/kernels.hpp"
#include "regscore/rng.hpp"

namespace regscore {

std::string_view to_string(ModelMode mode) {
    switch (mode) {
        case ModelMode::mlp_only: return "mlp";
        case ModelMode::nlp_only: return "nlp";
        case ModelMode::fused: return "fused";
    }
    return "unknown";
}

ModelMode parse_model_mode(std::string_view text) {
    if (text == "mlp" || text == "mlp_only") return ModelMode::mlp_only;
    if (text == "nlp" || text == "nlp_only") return ModelMode::nlp_only;
    if (text == "fused") return ModelMode::fused;
    throw Error(ErrorCode::InvalidConfig, "unknown model mode '" + std::string(text) + "' (expected mlp|nlp|fused)");
}

std::string_view verdict_name(int label) { return label == kSuspicious ? "suspicious" : "benign"; }

FusionHead head_init(std::size_t input_dim, std::uint64_t seed) {
    FusionHead head{Matrix(input_dim, 2), std::vector<double>(2, 0.0)};
    Rng rng(seed);
    const double limit = std::sqrt(6.0 / static_cast<double>(input_dim + 2));
    for (double& v : head.weight.values()) v = rng.uniform(-limit, limit);
    return head;
}

namespace {

std::size_t batch_rows(const Matrix& text_emb, const Matrix& num_emb) {
    if (text_emb.cols() > 0 && num_emb.cols() > 0 && text_emb.rows() != num_emb.rows()) {
        throw Error(ErrorCode::DimMismatch, "text and numeric embeddings have different batch sizes (" +
                                                std::to_string(text_emb.rows()) + " vs " +
                                                std::to_string(num_emb.rows()) + ")");
    }
    return text_emb.cols() > 0 ? text_emb.rows() : num_emb.rows();
}

Matrix concat(const Matrix& a, const Matrix& b, std::size_t rows) {
    Matrix out(rows, a.cols() + b.cols());
    for (std::size_t i = 0; i < rows; ++i) {
        auto dst = out.row(i);
        if (a.cols() > 0) std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
        if (b.cols() > 0) std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<long>(a.cols()));
    }
    return out;
}

}  // namespace

Matrix fuse_forward(const Matrix& text_emb, const Matrix& num_emb, const FusionHead& head) {
    const std::size_t n = batch_rows(text_emb, num_emb);
    const std::size_t width = text_emb.cols() + num_emb.cols();
    if (width != head.weight.rows() || head.weight.cols() != 2 || head.bias.size() != 2) {
        throw Error(ErrorCode::DimMismatch, "head expects input width " + std::to_string(head.weight.rows()) +
                                                ", got " + std::to_string(width));
    }
    if (n == 0) throw Error(ErrorCode::EmptyBatch, "fusion head called on an empty batch");
    Matrix logits;
    kernels::matmul(concat(text_emb, num_emb, n), head.weight, logits, kernels::Exec::serial);
    kernels::add_row_bias(logits, head.bias);
    return logits;
}

FuseGradients fuse_backward(const Matrix& text_emb, const Matrix& num_emb, const FusionHead& head,
                            const Matrix& grad_logits) {
    const std::size_t n = batch_rows(text_emb, num_emb);
    if (grad_logits.rows() != n || grad_logits.cols() != 2) {
        throw Error(ErrorCode::DimMismatch, "grad_logits shape does not match the batch");
    }
    const Matrix x = concat(text_emb, num_emb, n);
    FuseGradients g;
    g.head.bias.assign(2, 0.0);
    kernels::matmul_tn(x, grad_logits, g.head.weight, kernels::Exec::serial);
    kernels::accumulate_column_sums(grad_logits, g.head.bias);
    Matrix dx;
    kernels::matmul_nt(grad_logits, head.weight, dx, kernels::Exec::serial);
    g.text_emb = Matrix(text_emb.cols() > 0 ? n : 0, text_emb.cols());
    g.num_emb = Matrix(num_emb.cols() > 0 ? n : 0, num_emb.cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < text_emb.cols(); ++j) g.text_emb(i, j) = dx(i, j);
        for (std::size_t j = 0; j < num_emb.cols(); ++j) g.num_emb(i, j) = dx(i, text_emb.cols() + j);
    }
    return g;
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
    if (logits.cols() != 2 || logits.rows() != labels.size()) {
        throw Error(ErrorCode::DimMismatch, "cross_entropy needs a (batch x 2) logit matrix and one label per row");
    }
    if (labels.empty()) throw Error(ErrorCode::EmptyBatch, "cross_entropy on an empty batch");
    const std::size_t n = labels.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    LossResult r;
    r.grad = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y != kBenign && y != kSuspicious) {
            throw Error(ErrorCode::InvalidConfig, "label must be 0 or 1, got " + std::to_string(y));
        }
        const double m = std::max(logits(i, 0), logits(i, 1));
        const double lse = m + std::log(std::exp(logits(i, 0) - m) + std::exp(logits(i, 1) - m));
        r.loss += lse - logits(i, static_cast<std::size_t>(y));
        for (std::size_t c = 0; c < 2; ++c) {
            const double p = std::exp(logits(i, c) - lse);
            r.grad(i, c) = (p - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;
        }
    }
    r.loss *= inv_n;
    return r;
}

double p_suspicious(std::span<const double> logits) { return 1.0 / (1.0 + std::exp(logits[0] - logits[1])); }

Matrix feature_matrix(std::span<const FeatureRow> rows, const FeatureStats& stats) {
    Matrix x(rows.size(), kNumFeatures);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const FeatureRow& f = rows[i];
        const std::array<double, kNumFeatures> raw{f.similarity_score, static_cast<double>(f.length),
                                                   static_cast<double>(f.digit_count),
                                                   static_cast<double>(f.special_char_count)};
        for (std::size_t j = 0; j < kNumFeatures; ++j) {
            x(i, j) = stats.enabled ? (raw[j] - stats.mean[j]) / stats.stddev[j] : raw[j];
        }
    }
    return x;
}

FusionModel model_init(ModelMode mode, const MlpConfig& mlp_cfg, const EncoderConfig& enc_cfg, std::uint64_t seed) {
    FusionModel m;
    m.mode = mode;
    std::size_t head_width = 0;
    if (m.uses_mlp()) {
        MlpConfig cfg = mlp_cfg;
        cfg.seed = mix_seed(seed, 1);
        m.mlp = mlp_init(cfg);
        if (mode == ModelMode::fused) head_width += cfg.embedding_dim();
    }
    if (m.uses_encoder()) {
        EncoderConfig cfg = enc_cfg;
        cfg.seed = mix_seed(seed, 2);
        m.encoder = encoder_init(cfg);
        head_width += cfg.embed_dim;
    }
    if (mode != ModelMode::mlp_only) m.head = head_init(head_width, mix_seed(seed, 3));
    return m;
}

namespace {

void check_inputs(std::span<const DomainName> domains, const Matrix& features) {
    if (domains.empty()) throw Error(ErrorCode::EmptyBatch, "model called on an empty batch");
    if (features.rows() != domains.size()) {
        throw Error(ErrorCode::DimMismatch, "feature rows (" + std::to_string(features.rows()) +
                                                ") do not match domains (" + std::to_string(domains.size()) + ")");
    }
}

Matrix head_logits(const FusionModel& m, const ModelForward& fwd) {
    switch (m.mode) {
        case ModelMode::mlp_only: return fwd.mlp.logits;
        case ModelMode::nlp_only: return fuse_forward(fwd.text.embedding, Matrix(), m.head);
        case ModelMode::fused: return fuse_forward(fwd.text.embedding, fwd.mlp.embedding, m.head);
    }
    return {};
}

}  // namespace

ModelForward model_forward(FusionModel& m, std::span<const DomainName> domains, const Matrix& features, Mode mode,
                           std::uint64_t dropout_seed) {
    check_inputs(domains, features);
    ModelForward fwd;
    if (m.uses_mlp()) {
        fwd.mlp = mode == Mode::train ? mlp_forward(m.mlp, features, Mode::train, dropout_seed)
                                      : mlp_forward(std::as_const(m.mlp), features);
    }
    if (m.uses_encoder()) fwd.text = encode_batch(m.encoder, domains, mode);
    fwd.logits = head_logits(m, fwd);
    return fwd;
}

Matrix model_logits(const FusionModel& m, std::span<const DomainName> domains, const Matrix& features) {
    check_inputs(domains, features);
    ModelForward fwd;
    if (m.uses_mlp()) fwd.mlp = mlp_forward(m.mlp, features);
    if (m.uses_encoder()) fwd.text = encode_batch(m.encoder, domains, Mode::eval);
    return head_logits(m, fwd);
}

ModelGradients model_backward(const FusionModel& m, const ModelForward& fwd, const Matrix& grad_logits) {
    ModelGradients g;
    if (m.mode == ModelMode::mlp_only) {
        g.mlp = mlp_backward(m.mlp, fwd.mlp, MlpOutputGrad{grad_logits, Matrix()});
        return g;
    }
    const Matrix& num_emb = m.mode == ModelMode::fused ? fwd.mlp.embedding : Matrix();
    FuseGradients fg = fuse_backward(fwd.text.embedding, num_emb, m.head, grad_logits);
    g.head = std::move(fg.head);
    g.encoder = encoder_backward(m.encoder, fwd.text.cache, fg.text_emb);
    if (m.mode == ModelMode::fused) g.mlp = mlp_backward(m.mlp, fwd.mlp, MlpOutputGrad{Matrix(), fg.num_emb});
    return g;
}

namespace {

void append_head(ParamList& out, FusionHead& head) {
    if (head.weight.empty()) return;
    out.push_back({"head.weight", head.weight.values()});
    out.push_back({"head.bias", head.bias});
}

void append_prefixed(ParamList& out, ParamList more, const std::string& prefix) {
    for (ParamView& p : more) out.push_back({prefix + p.name, p.values});
}

}  // namespace

ParamList model_parameters(FusionModel& m) {
    ParamList out;
    if (!m.mlp.dense.empty()) append_prefixed(out, mlp_parameters(m.mlp), "mlp.");
    if (!m.encoder.embedding.empty()) append_prefixed(out, encoder_parameters(m.encoder), "encoder.");
    append_head(out, m.head);
    return out;
}

ParamList model_gradient_views(ModelGradients& g) {
    ParamList out;
    if (!g.mlp.dense.empty()) append_prefixed(out, mlp_gradient_views(g.mlp), "mlp.");
    if (!g.encoder.embedding.empty()) append_prefixed(out, encoder_parameters(g.encoder), "encoder.");
    append_head(out, g.head);
    return out;
}

std::vector<Verdict> predict_batch(const FusionModel& m, std::span<const DomainName> domains,
                                   std::span<const FeatureRow> features, double threshold) {
    if (features.size() != domains.size()) {
        throw Error(ErrorCode::DimMismatch, "predict needs one feature row per domain");
    }
    const Matrix logits = model_logits(m, domains, feature_matrix(features, m.stats));
    std::vector<Verdict> out(domains.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        Verdict& v = out[i];
        v.logits = {logits(i, 0), logits(i, 1)};
        v.p_suspicious = p_suspicious(logits.row(i));
        v.label = v.p_suspicious >= threshold ? kSuspicious : kBenign;
    }
    return out;
}

Verdict predict(const FusionModel& m, const DomainName& domain, const FeatureRow& features, double threshold) {
    return predict_batch(m, std::span(&domain, 1), std::span(&features, 1), threshold).front();
}

}  // namespace regscore
