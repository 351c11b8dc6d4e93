#include "regscore/encoder.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "regscore/error.hpp"
#include "regscore/rng.hpp"

namespace regscore {

namespace {

constexpr double kLayerNormEpsilon = 1e-5;
using kernels::Exec;

}  // namespace

void EncoderConfig::validate() const {
    if (embed_dim == 0 || num_layers == 0 || num_heads == 0 || ffn_dim == 0 || max_len == 0) {
        throw Error(ErrorCode::InvalidConfig, "encoder dimensions must be positive");
    }
    if (embed_dim % num_heads != 0) {
        throw Error(ErrorCode::InvalidConfig, "embed_dim " + std::to_string(embed_dim) +
                                                  " is not divisible by num_heads " + std::to_string(num_heads));
    }
}

/// Activations for one example at its own length L.
struct EncoderLayerCache {
    Matrix input;  ///< L x d residual stream entering the layer
    Matrix ln1_hat;
    std::vector<double> ln1_inv_std;
    Matrix u1;  ///< LN1 output
    Matrix q, k, v;
    std::vector<Matrix> attn;  ///< per head, L x L row-softmax
    Matrix context;            ///< heads concatenated, L x d
    Matrix h1;                 ///< after the attention residual
    Matrix ln2_hat;
    std::vector<double> ln2_inv_std;
    Matrix u2;
    Matrix ffn_pre;  ///< L x ffn, before GELU
    Matrix ffn_act;
};

struct EncoderExampleCache {
    std::vector<unsigned char> tokens;
    std::vector<EncoderLayerCache> layers;
    Matrix final_hat;
    std::vector<double> final_inv_std;
};

namespace {

DenseLayer glorot_layer(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : layer.weight.values()) v = rng.uniform(-limit, limit);
    return layer;
}

Matrix linear(const Matrix& x, const DenseLayer& layer) {
    Matrix out;
    kernels::matmul(x, layer.weight, out, Exec::serial);
    kernels::add_row_bias(out, layer.bias);
    return out;
}

/// dW += x^T dy, db += colsum(dy); returns dy W^T.
Matrix linear_backward(const Matrix& x, const DenseLayer& layer, const Matrix& dy, DenseLayer& grad) {
    Matrix dw;
    kernels::matmul_tn(x, dy, dw, Exec::serial);
    for (std::size_t i = 0; i < dw.size(); ++i) grad.weight.values()[i] += dw.values()[i];
    kernels::accumulate_column_sums(dy, grad.bias);
    Matrix dx;
    kernels::matmul_nt(dy, layer.weight, dx, Exec::serial);
    return dx;
}

/// Row-wise layer norm; fills x-hat and 1/std for the backward pass.
Matrix layer_norm(const Matrix& x, const std::vector<double>& gain, const std::vector<double>& bias, Matrix& hat,
                  std::vector<double>& inv_std) {
    const std::size_t n = x.rows(), d = x.cols();
    hat.resize(n, d);
    inv_std.assign(n, 0.0);
    Matrix y(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += x(i, j);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
        var /= static_cast<double>(d);
        const double r = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        inv_std[i] = r;
        for (std::size_t j = 0; j < d; ++j) {
            hat(i, j) = (x(i, j) - mean) * r;
            y(i, j) = gain[j] * hat(i, j) + bias[j];
        }
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& hat, const std::vector<double>& inv_std,
                           const std::vector<double>& gain, std::vector<double>& dgain, std::vector<double>& dbias) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Matrix dx(n, d);
    std::vector<double> dhat(d);
    for (std::size_t i = 0; i < n; ++i) {
        double mean_dhat = 0.0, mean_dhat_hat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dgain[j] += dy(i, j) * hat(i, j);
            dbias[j] += dy(i, j);
            dhat[j] = dy(i, j) * gain[j];
            mean_dhat += dhat[j];
            mean_dhat_hat += dhat[j] * hat(i, j);
        }
        mean_dhat /= static_cast<double>(d);
        mean_dhat_hat /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
            dx(i, j) = inv_std[i] * (dhat[j] - mean_dhat - hat(i, j) * mean_dhat_hat);
        }
    }
    return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

void add_into(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.values()[i] += src.values()[i];
}

/// Runs one example; writes the pooled row into `out` and, if `cache` is
/// non-null, keeps everything the backward pass needs.
void encode_one(const EncoderWeights& w, std::span<const unsigned char> tokens, std::span<double> out,
                EncoderExampleCache* cache) {
    const EncoderConfig& cfg = w.config;
    const std::size_t len = tokens.size();
    const std::size_t d = cfg.embed_dim;
    const std::size_t dh = d / cfg.num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix h(len, d);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t j = 0; j < d; ++j) h(t, j) = w.embedding(tokens[t], j) + w.positional(t, j);
    }

    EncoderLayerCache scratch;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const EncoderLayerWeights& lw = w.layers[l];
        EncoderLayerCache& c = cache ? cache->layers.emplace_back() : scratch;
        c.input = h;
        c.u1 = layer_norm(h, lw.ln1_gain, lw.ln1_bias, c.ln1_hat, c.ln1_inv_std);
        c.q = linear(c.u1, lw.query);
        c.k = linear(c.u1, lw.key);
        c.v = linear(c.u1, lw.value);
        c.context.resize(len, d);
        c.attn.assign(cfg.num_heads, Matrix(len, len));
        for (std::size_t hd = 0; hd < cfg.num_heads; ++hd) {
            const std::size_t off = hd * dh;
            Matrix& a = c.attn[hd];
            for (std::size_t i = 0; i < len; ++i) {
                double row_max = -INFINITY;
                for (std::size_t j = 0; j < len; ++j) {
                    double s = 0.0;
                    for (std::size_t x = 0; x < dh; ++x) s += c.q(i, off + x) * c.k(j, off + x);
                    a(i, j) = s * scale;
                    row_max = std::max(row_max, a(i, j));
                }
                double z = 0.0;
                for (std::size_t j = 0; j < len; ++j) {
                    a(i, j) = std::exp(a(i, j) - row_max);
                    z += a(i, j);
                }
                for (std::size_t j = 0; j < len; ++j) a(i, j) /= z;
                for (std::size_t j = 0; j < len; ++j) {
                    const double p = a(i, j);
                    for (std::size_t x = 0; x < dh; ++x) c.context(i, off + x) += p * c.v(j, off + x);
                }
            }
        }
        c.h1 = linear(c.context, lw.output);
        add_into(c.h1, h);

        c.u2 = layer_norm(c.h1, lw.ln2_gain, lw.ln2_bias, c.ln2_hat, c.ln2_inv_std);
        c.ffn_pre = linear(c.u2, lw.ffn_in);
        c.ffn_act = c.ffn_pre;
        for (double& v : c.ffn_act.values()) v = gelu(v);
        h = linear(c.ffn_act, lw.ffn_out);
        add_into(h, c.h1);
    }

    Matrix hat;
    std::vector<double> inv_std;
    const Matrix y = layer_norm(h, w.final_gain, w.final_bias, hat, inv_std);
    const double inv_len = 1.0 / static_cast<double>(len);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < len; ++t) s += y(t, j);
        out[j] = s * inv_len;
    }
    if (cache) {
        cache->final_hat = std::move(hat);
        cache->final_inv_std = std::move(inv_std);
    }
}

void backward_one(const EncoderWeights& w, const EncoderExampleCache& c, std::span<const double> grad_row,
                  EncoderGradients& g) {
    const EncoderConfig& cfg = w.config;
    const std::size_t len = c.tokens.size();
    const std::size_t d = cfg.embed_dim;
    const std::size_t dh_width = d / cfg.num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh_width));

    Matrix dy(len, d);
    const double inv_len = 1.0 / static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t j = 0; j < d; ++j) dy(t, j) = grad_row[j] * inv_len;
    }
    Matrix dh = layer_norm_backward(dy, c.final_hat, c.final_inv_std, w.final_gain, g.final_gain, g.final_bias);

    for (std::size_t l = cfg.num_layers; l-- > 0;) {
        const EncoderLayerWeights& lw = w.layers[l];
        EncoderLayerWeights& lg = g.layers[l];
        const EncoderLayerCache& lc = c.layers[l];

        // Feed-forward sublayer: h = h1 + W2 gelu(W1 LN2(h1)).
        Matrix dh1 = dh;
        Matrix dact = linear_backward(lc.ffn_act, lw.ffn_out, dh, lg.ffn_out);
        for (std::size_t i = 0; i < dact.size(); ++i) dact.values()[i] *= gelu_grad(lc.ffn_pre.values()[i]);
        const Matrix du2 = linear_backward(lc.u2, lw.ffn_in, dact, lg.ffn_in);
        add_into(dh1, layer_norm_backward(du2, lc.ln2_hat, lc.ln2_inv_std, lw.ln2_gain, lg.ln2_gain, lg.ln2_bias));

        // Attention sublayer: h1 = h + Wo attn(LN1(h)).
        Matrix dinput = dh1;
        const Matrix dctx = linear_backward(lc.context, lw.output, dh1, lg.output);
        Matrix dq(len, d), dk(len, d), dv(len, d);
        std::vector<double> da(len);
        for (std::size_t hd = 0; hd < cfg.num_heads; ++hd) {
            const std::size_t off = hd * dh_width;
            const Matrix& a = lc.attn[hd];
            for (std::size_t i = 0; i < len; ++i) {
                double weighted = 0.0;
                for (std::size_t j = 0; j < len; ++j) {
                    double s = 0.0;
                    for (std::size_t x = 0; x < dh_width; ++x) {
                        s += dctx(i, off + x) * lc.v(j, off + x);
                        dv(j, off + x) += a(i, j) * dctx(i, off + x);
                    }
                    da[j] = s;
                    weighted += a(i, j) * s;
                }
                for (std::size_t j = 0; j < len; ++j) {
                    const double ds = a(i, j) * (da[j] - weighted) * scale;
                    for (std::size_t x = 0; x < dh_width; ++x) {
                        dq(i, off + x) += ds * lc.k(j, off + x);
                        dk(j, off + x) += ds * lc.q(i, off + x);
                    }
                }
            }
        }
        Matrix du1 = linear_backward(lc.u1, lw.query, dq, lg.query);
        add_into(du1, linear_backward(lc.u1, lw.key, dk, lg.key));
        add_into(du1, linear_backward(lc.u1, lw.value, dv, lg.value));
        add_into(dinput, layer_norm_backward(du1, lc.ln1_hat, lc.ln1_inv_std, lw.ln1_gain, lg.ln1_gain, lg.ln1_bias));
        dh = std::move(dinput);
    }

    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t j = 0; j < d; ++j) g.embedding(c.tokens[t], j) += dh(t, j);
    }
}

}  // namespace

Matrix sinusoidal_positions(std::size_t max_len, std::size_t dim) {
    Matrix p(max_len, dim);
    for (std::size_t t = 0; t < max_len; ++t) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(dim));
            const double angle = static_cast<double>(t) * freq;
            p(t, j) = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return p;
}

EncoderWeights encoder_init(const EncoderConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim;
    EncoderWeights w;
    w.config = cfg;
    w.embedding = Matrix(kVocabSize, d);
    Rng emb_rng(mix_seed(cfg.seed, 0));
    for (double& v : w.embedding.values()) v = emb_rng.uniform(-1.0, 1.0);
    w.positional = sinusoidal_positions(cfg.max_len, d);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        Rng rng(mix_seed(cfg.seed, l + 1));
        EncoderLayerWeights lw;
        lw.ln1_gain.assign(d, 1.0);
        lw.ln1_bias.assign(d, 0.0);
        lw.query = glorot_layer(d, d, rng);
        lw.key = glorot_layer(d, d, rng);
        lw.value = glorot_layer(d, d, rng);
        lw.output = glorot_layer(d, d, rng);
        lw.ln2_gain.assign(d, 1.0);
        lw.ln2_bias.assign(d, 0.0);
        lw.ffn_in = glorot_layer(d, cfg.ffn_dim, rng);
        lw.ffn_out = glorot_layer(cfg.ffn_dim, d, rng);
        w.layers.push_back(std::move(lw));
    }
    w.final_gain.assign(d, 1.0);
    w.final_bias.assign(d, 0.0);
    return w;
}

EncodeResult encode_bytes(const EncoderWeights& w, std::span<const std::string> texts, Mode mode, Exec exec) {
    if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "encoder called on an empty batch");
    const std::size_t n = texts.size();
    const std::size_t max_len = w.config.max_len;
    for (std::size_t i = 0; i < n; ++i) {
        if (texts[i].empty()) throw Error(ErrorCode::EmptyDomain, "empty domain at batch row " + std::to_string(i));
    }

    EncodeResult result;
    result.embedding = Matrix(n, w.config.embed_dim);
    result.truncated.resize(n);
    result.cache.mode = mode;
    std::vector<std::shared_ptr<EncoderExampleCache>> caches(mode == Mode::train ? n : 0);
    for (std::size_t i = 0; i < n; ++i) result.truncated[i] = texts[i].size() > max_len;

    const auto run = [&](std::size_t i) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(texts[i].data());
        const std::span<const unsigned char> tokens(bytes, std::min(texts[i].size(), max_len));
        EncoderExampleCache* cache = nullptr;
        if (mode == Mode::train) {
            caches[i] = std::make_shared<EncoderExampleCache>();
            caches[i]->tokens.assign(tokens.begin(), tokens.end());
            cache = caches[i].get();
        }
        encode_one(w, tokens, result.embedding.row(i), cache);
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        for (std::size_t i = 0; i < n; ++i) run(i);
    }
    result.cache.examples.assign(caches.begin(), caches.end());
    return result;
}

EncodeResult encode_batch(const EncoderWeights& w, std::span<const DomainName> domains, Mode mode, Exec exec) {
    std::vector<std::string> texts;
    texts.reserve(domains.size());
    for (const DomainName& d : domains) texts.push_back(d.text());
    return encode_bytes(w, texts, mode, exec);
}

EncoderGradients encoder_zero_gradients(const EncoderWeights& w) {
    EncoderGradients g = w;
    g.positional = Matrix();
    for (ParamView& p : encoder_parameters(g)) std::fill(p.values.begin(), p.values.end(), 0.0);
    return g;
}

EncoderGradients encoder_backward(const EncoderWeights& w, const EncoderCache& cache, const Matrix& grad_out) {
    if (cache.mode != Mode::train) {
        throw Error(ErrorCode::StaleActivations, "encoder backward needs a train-mode cache");
    }
    if (grad_out.rows() != cache.examples.size() || grad_out.cols() != w.config.embed_dim) {
        throw Error(ErrorCode::DimMismatch, "encoder grad_out shape does not match the cached batch");
    }
    EncoderGradients g = encoder_zero_gradients(w);
    for (std::size_t i = 0; i < cache.examples.size(); ++i) {
        const auto row = grad_out.row(i);
        if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
        backward_one(w, *cache.examples[i], row, g);
    }
    return g;
}

ParamList encoder_parameters(EncoderWeights& w) {
    ParamList out;
    out.push_back({"embedding", w.embedding.values()});
    const auto dense = [&](const std::string& name, DenseLayer& layer) {
        out.push_back({name + ".weight", layer.weight.values()});
        out.push_back({name + ".bias", layer.bias});
    };
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        EncoderLayerWeights& lw = w.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        out.push_back({p + "ln1.gain", lw.ln1_gain});
        out.push_back({p + "ln1.bias", lw.ln1_bias});
        dense(p + "query", lw.query);
        dense(p + "key", lw.key);
        dense(p + "value", lw.value);
        dense(p + "output", lw.output);
        out.push_back({p + "ln2.gain", lw.ln2_gain});
        out.push_back({p + "ln2.bias", lw.ln2_bias});
        dense(p + "ffn_in", lw.ffn_in);
        dense(p + "ffn_out", lw.ffn_out);
    }
    out.push_back({"final.gain", w.final_gain});
    out.push_back({"final.bias", w.final_bias});
    return out;
}

}  // namespace regscore
