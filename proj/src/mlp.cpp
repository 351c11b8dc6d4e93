#include "regscore/mlp.hpp"

#include <cmath>
#include <string>

#include "regscore/error.hpp"
#include "regscore/kernels.hpp"
#include "regscore/rng.hpp"

namespace regscore {

void MlpConfig::validate() const {
    if (input_dim == 0 || output_dim == 0) throw Error(ErrorCode::InvalidConfig, "MLP dims must be positive");
    if (layer_widths.size() != 4 || dropout_ps.size() != 4) {
        throw Error(ErrorCode::InvalidConfig, "MLP needs exactly four hidden widths and dropout rates");
    }
    for (std::size_t w : layer_widths) {
        if (w == 0) throw Error(ErrorCode::InvalidConfig, "MLP hidden width must be positive");
    }
    for (double p : dropout_ps) {
        if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout p must lie in [0, 1)");
    }
    if (!(bn_epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "BatchNorm epsilon must be positive");
    if (!std::isfinite(leaky_slope)) throw Error(ErrorCode::InvalidConfig, "leaky slope must be finite");
}

namespace {

DenseLayer glorot_layer(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : layer.weight.values()) v = rng.uniform(-limit, limit);
    return layer;
}

Matrix affine(const Matrix& x, const DenseLayer& layer) {
    Matrix out;
    kernels::matmul(x, layer.weight, out);
    kernels::add_row_bias(out, layer.bias);
    return out;
}

}  // namespace

MlpWeights mlp_init(const MlpConfig& cfg) {
    cfg.validate();
    MlpWeights w;
    w.config = cfg;
    std::size_t fan_in = cfg.input_dim;
    for (std::size_t k = 0; k <= cfg.layer_widths.size(); ++k) {
        const std::size_t fan_out = k < cfg.layer_widths.size() ? cfg.layer_widths[k] : cfg.output_dim;
        Rng rng(mix_seed(cfg.seed, k));
        w.dense.push_back(glorot_layer(fan_in, fan_out, rng));
        if (k < cfg.layer_widths.size()) {
            w.norm.push_back(BatchNormParams{std::vector<double>(fan_out, 1.0), std::vector<double>(fan_out, 0.0),
                                             std::vector<double>(fan_out, 0.0), std::vector<double>(fan_out, 1.0)});
        }
        fan_in = fan_out;
    }
    return w;
}

void apply_dropout(Matrix& values, double p, std::uint64_t seed, Matrix& scale) {
    scale.resize(values.rows(), values.cols());
    const double keep_scale = 1.0 / (1.0 - p);
    Rng rng(seed);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double s = rng.uniform() >= p ? keep_scale : 0.0;
        scale.values()[i] = s;
        values.values()[i] *= s;
    }
}

namespace {

MlpActivations forward_impl(const MlpWeights& w, MlpWeights* mutable_w, const Matrix& x, Mode mode,
                            std::uint64_t dropout_seed) {
    const MlpConfig& cfg = w.config;
    if (x.cols() != cfg.input_dim) {
        throw Error(ErrorCode::DimMismatch, "MLP expects " + std::to_string(cfg.input_dim) + " input columns, got " +
                                                std::to_string(x.cols()));
    }
    if (x.rows() == 0) throw Error(ErrorCode::EmptyBatch, "MLP forward on an empty batch");
    if (mode == Mode::train && x.rows() < 2) {
        throw Error(ErrorCode::BatchTooSmall, "train-mode BatchNorm needs at least 2 rows");
    }

    const std::size_t n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    MlpActivations acts;
    acts.mode = mode;
    acts.hidden.resize(cfg.layer_widths.size());

    Matrix h = x;
    for (std::size_t k = 0; k < cfg.layer_widths.size(); ++k) {
        HiddenCache& cache = acts.hidden[k];
        const BatchNormParams& bn = w.norm[k];
        Matrix z = affine(h, w.dense[k]);
        const std::size_t width = z.cols();

        std::vector<double> mean(width, 0.0);
        std::vector<double> var(width, 0.0);
        if (mode == Mode::train) {
            kernels::accumulate_column_sums(z, mean);
            for (double& m : mean) m *= inv_n;
            for (std::size_t i = 0; i < n; ++i) {
                const auto r = z.row(i);
                for (std::size_t j = 0; j < width; ++j) {
                    const double d = r[j] - mean[j];
                    var[j] += d * d;
                }
            }
            for (double& v : var) v *= inv_n;
        } else {
            mean = bn.running_mean;
            var = bn.running_var;
        }

        cache.inv_std.resize(width);
        for (std::size_t j = 0; j < width; ++j) cache.inv_std[j] = 1.0 / std::sqrt(var[j] + cfg.bn_epsilon);

        cache.normalized = Matrix(n, width);
        cache.pre_activation = Matrix(n, width);
        Matrix a(n, width);
        for (std::size_t i = 0; i < n; ++i) {
            const auto zr = z.row(i);
            auto xr = cache.normalized.row(i);
            auto yr = cache.pre_activation.row(i);
            auto ar = a.row(i);
            for (std::size_t j = 0; j < width; ++j) {
                xr[j] = (zr[j] - mean[j]) * cache.inv_std[j];
                yr[j] = bn.gamma[j] * xr[j] + bn.beta[j];
                ar[j] = yr[j] > 0.0 ? yr[j] : cfg.leaky_slope * yr[j];
            }
        }

        if (mode == Mode::train) {
            // Running variance tracks the unbiased estimate.
            BatchNormParams& mbn = mutable_w->norm[k];
            const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
            for (std::size_t j = 0; j < width; ++j) {
                mbn.running_mean[j] = (1.0 - kBatchNormMomentum) * mbn.running_mean[j] + kBatchNormMomentum * mean[j];
                mbn.running_var[j] =
                    (1.0 - kBatchNormMomentum) * mbn.running_var[j] + kBatchNormMomentum * var[j] * unbias;
            }
            apply_dropout(a, cfg.dropout_ps[k], mix_seed(dropout_seed, k), cache.dropout_scale);
        }
        cache.input = std::move(h);
        h = std::move(a);
    }

    acts.logits = affine(h, w.dense.back());
    acts.embedding = std::move(h);
    return acts;
}

}  // namespace

MlpActivations mlp_forward(MlpWeights& w, const Matrix& x, Mode mode, std::uint64_t dropout_seed) {
    return forward_impl(w, &w, x, mode, dropout_seed);
}

MlpActivations mlp_forward(const MlpWeights& w, const Matrix& x) {
    return forward_impl(w, nullptr, x, Mode::eval, 0);
}

MlpGradients mlp_zero_gradients(const MlpWeights& w) {
    MlpGradients g;
    for (const auto& layer : w.dense) {
        g.dense.push_back(DenseLayer{Matrix(layer.weight.rows(), layer.weight.cols()),
                                     std::vector<double>(layer.bias.size(), 0.0)});
    }
    for (const auto& bn : w.norm) {
        g.gamma.emplace_back(bn.gamma.size(), 0.0);
        g.beta.emplace_back(bn.beta.size(), 0.0);
    }
    return g;
}

MlpGradients mlp_backward(const MlpWeights& w, const MlpActivations& acts, const MlpOutputGrad& grad) {
    if (acts.mode != Mode::train) {
        throw Error(ErrorCode::StaleActivations, "MLP backward needs train-mode activations");
    }
    const MlpConfig& cfg = w.config;
    const std::size_t n = acts.embedding.rows();
    const std::size_t emb_dim = acts.embedding.cols();
    MlpGradients g = mlp_zero_gradients(w);

    Matrix upstream(n, emb_dim);
    if (grad.logits.rows() > 0) {
        if (grad.logits.rows() != n || grad.logits.cols() != cfg.output_dim) {
            throw Error(ErrorCode::DimMismatch, "logit gradient shape mismatch");
        }
        DenseLayer& out = g.dense.back();
        kernels::matmul_tn(acts.embedding, grad.logits, out.weight);
        kernels::accumulate_column_sums(grad.logits, out.bias);
        kernels::matmul_nt(grad.logits, w.dense.back().weight, upstream);
    }
    if (grad.embedding.rows() > 0) {
        if (grad.embedding.rows() != n || grad.embedding.cols() != emb_dim) {
            throw Error(ErrorCode::DimMismatch, "embedding gradient shape mismatch");
        }
        for (std::size_t i = 0; i < upstream.size(); ++i) upstream.values()[i] += grad.embedding.values()[i];
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = cfg.layer_widths.size(); k-- > 0;) {
        const HiddenCache& cache = acts.hidden[k];
        const BatchNormParams& bn = w.norm[k];
        const std::size_t width = upstream.cols();

        // Through dropout and LeakyReLU, in place: upstream becomes dL/dy.
        for (std::size_t i = 0; i < upstream.size(); ++i) {
            double v = upstream.values()[i] * cache.dropout_scale.values()[i];
            if (!(cache.pre_activation.values()[i] > 0.0)) v *= cfg.leaky_slope;
            upstream.values()[i] = v;
        }

        std::vector<double>& dgamma = g.gamma[k];
        std::vector<double>& dbeta = g.beta[k];
        for (std::size_t i = 0; i < n; ++i) {
            const auto dy = upstream.row(i);
            const auto xh = cache.normalized.row(i);
            for (std::size_t j = 0; j < width; ++j) {
                dgamma[j] += dy[j] * xh[j];
                dbeta[j] += dy[j];
            }
        }

        // dz = inv_std / n * (n * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat)),
        // with dxhat = dy * gamma, so the sums are gamma * dbeta and gamma * dgamma.
        Matrix dz(n, width);
        for (std::size_t i = 0; i < n; ++i) {
            const auto dy = upstream.row(i);
            const auto xh = cache.normalized.row(i);
            auto out = dz.row(i);
            for (std::size_t j = 0; j < width; ++j) {
                const double dxhat = dy[j] * bn.gamma[j];
                out[j] = cache.inv_std[j] * (dxhat - inv_n * bn.gamma[j] * (dbeta[j] + xh[j] * dgamma[j]));
            }
        }

        DenseLayer& layer_grad = g.dense[k];
        kernels::matmul_tn(cache.input, dz, layer_grad.weight);
        kernels::accumulate_column_sums(dz, layer_grad.bias);
        Matrix next;
        kernels::matmul_nt(dz, w.dense[k].weight, next);
        upstream = std::move(next);
    }
    g.input = std::move(upstream);
    return g;
}

ParamList mlp_parameters(MlpWeights& w) {
    ParamList out;
    const std::size_t hidden = w.norm.size();
    for (std::size_t k = 0; k < w.dense.size(); ++k) {
        const std::string fc = "fc" + std::to_string(k + 1);
        out.push_back({fc + ".weight", w.dense[k].weight.values()});
        out.push_back({fc + ".bias", w.dense[k].bias});
        if (k < hidden) {
            const std::string bn = "bn" + std::to_string(k + 1);
            out.push_back({bn + ".gamma", w.norm[k].gamma});
            out.push_back({bn + ".beta", w.norm[k].beta});
        }
    }
    return out;
}

ParamList mlp_gradient_views(MlpGradients& g) {
    ParamList out;
    const std::size_t hidden = g.gamma.size();
    for (std::size_t k = 0; k < g.dense.size(); ++k) {
        const std::string fc = "fc" + std::to_string(k + 1);
        out.push_back({fc + ".weight", g.dense[k].weight.values()});
        out.push_back({fc + ".bias", g.dense[k].bias});
        if (k < hidden) {
            const std::string bn = "bn" + std::to_string(k + 1);
            out.push_back({bn + ".gamma", g.gamma[k]});
            out.push_back({bn + ".beta", g.beta[k]});
        }
    }
    return out;
}

}  // namespace regscore
