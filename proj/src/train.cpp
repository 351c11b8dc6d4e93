#include "regscore/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "regscore/error.hpp"
#include "regscore/rng.hpp"

namespace regscore {

void Hyperparams::validate() const {
    const bool positive = learning_rate > 0.0 && adam_eps > 0.0 && adam_beta1 > 0.0 && adam_beta1 < 1.0 &&
                          adam_beta2 > 0.0 && adam_beta2 < 1.0;
    if (!positive) throw Error(ErrorCode::InvalidConfig, "learning rate, eps and Adam betas must lie in range");
    if (batch_size < 2) throw Error(ErrorCode::InvalidConfig, "batch_size must be at least 2 (BatchNorm)");
    if (early_stop_patience == 0) throw Error(ErrorCode::InvalidConfig, "early_stop_patience must be positive");
}

std::string to_json_line(const EpochRecord& r) {
    const nlohmann::ordered_json j{{"epoch", r.epoch},
                                   {"train_loss", r.train_loss},
                                   {"val_accuracy", r.val.accuracy},
                                   {"val_precision", r.val.precision},
                                   {"val_recall", r.val.recall},
                                   {"val_f1", r.val.f1}};
    return j.dump();
}

namespace {

constexpr std::size_t kEvalChunk = 512;

struct Batch {
    std::vector<DomainName> domains;
    std::vector<FeatureRow> features;
    std::vector<int> labels;
};

Batch gather(const Dataset& ds, std::span<const std::size_t> idx) {
    Batch b;
    b.domains.reserve(idx.size());
    for (std::size_t i : idx) {
        b.domains.push_back(ds.rows[i].domain);
        b.features.push_back(ds.rows[i].features);
        b.labels.push_back(ds.rows[i].label);
    }
    return b;
}

class Adam {
public:
    Adam(const Hyperparams& hp, const ParamList& params) : hp_(hp) {
        for (const ParamView& p : params) {
            m_.emplace_back(p.values.size(), 0.0);
            v_.emplace_back(p.values.size(), 0.0);
        }
    }

    void step(const ParamList& params, const ParamList& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(hp_.adam_beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(hp_.adam_beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            std::span<double> w = params[k].values;
            std::span<const double> g = grads[k].values;
            std::vector<double>& m = m_[k];
            std::vector<double>& v = v_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = hp_.adam_beta1 * m[i] + (1.0 - hp_.adam_beta1) * g[i];
                v[i] = hp_.adam_beta2 * v[i] + (1.0 - hp_.adam_beta2) * g[i] * g[i];
                w[i] -= hp_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + hp_.adam_eps);
            }
        }
    }

private:
    const Hyperparams& hp_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace

std::vector<int> predict_labels(const FusionModel& m, const Dataset& ds, double threshold) {
    std::vector<int> out;
    out.reserve(ds.rows.size());
    std::vector<std::size_t> idx(ds.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t start = 0; start < idx.size(); start += kEvalChunk) {
        const std::size_t end = std::min(idx.size(), start + kEvalChunk);
        const Batch b = gather(ds, std::span(idx).subspan(start, end - start));
        for (const Verdict& v : predict_batch(m, b.domains, b.features, threshold)) out.push_back(v.label);
    }
    return out;
}

Metrics evaluate(const FusionModel& m, const Dataset& ds) {
    std::vector<int> truth;
    truth.reserve(ds.rows.size());
    for (const DatasetRow& r : ds.rows) truth.push_back(r.label);
    return metrics_from_confusion(confusion(predict_labels(m, ds, m.threshold), truth));
}

TrainResult train_model(ModelMode mode, const Dataset& train, const Dataset& val, const Hyperparams& hp,
                        const TrainOptions& options) {
    hp.validate();
    if (train.rows.size() < 2) throw Error(ErrorCode::DatasetTooSmall, "training needs at least 2 rows");

    TrainResult result;
    FusionModel model = model_init(mode, options.mlp, options.encoder, hp.seed);
    model.stats = train.stats;
    model.similarity = options.similarity;
    model.threshold = options.threshold;
    result.model = model;
    if (hp.max_epochs == 0) return result;
    if (val.rows.empty()) throw Error(ErrorCode::DatasetTooSmall, "validation partition is empty");

    Adam adam(hp, model_parameters(model));
    std::vector<std::size_t> order(train.rows.size());
    double best_f1 = -1.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(hp.seed, 0x5EED0000 + epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t loss_rows = 0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += hp.batch_size, ++batch_no) {
            const std::size_t end = std::min(order.size(), start + hp.batch_size);
            // A lone trailing row cannot form BatchNorm statistics; it is skipped this epoch.
            if (end - start < 2) continue;
            const Batch b = gather(train, std::span(order).subspan(start, end - start));
            const Matrix x = feature_matrix(b.features, model.stats);
            const ModelForward fwd =
                model_forward(model, b.domains, x, Mode::train, mix_seed(mix_seed(hp.seed, epoch), batch_no));
            const LossResult ce = cross_entropy(fwd.logits, b.labels);
            if (!std::isfinite(ce.loss)) {
                throw Error(ErrorCode::Diverged, "loss became non-finite at epoch " + std::to_string(epoch) +
                                                     ", batch " + std::to_string(batch_no));
            }
            ModelGradients grads = model_backward(model, fwd, ce.grad);
            adam.step(model_parameters(model), model_gradient_views(grads));
            loss_sum += ce.loss * static_cast<double>(end - start);
            loss_rows += end - start;
        }

        EpochRecord rec{epoch, loss_rows ? loss_sum / static_cast<double>(loss_rows) : 0.0, evaluate(model, val)};
        result.history.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);

        if (rec.val.f1 > best_f1) {
            best_f1 = rec.val.f1;
            result.model = model;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= hp.early_stop_patience) {
            break;
        }
    }
    return result;
}

}  // namespace regscore
