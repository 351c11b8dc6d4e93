#include "doctest.h"

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "regscore/error.hpp"
#include "regscore/fusion.hpp"
#include "regscore/rng.hpp"

using namespace regscore;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Matrix m(n, d);
    for (double& v : m.values()) v = rng.uniform(-scale, scale);
    return m;
}

double dot(const Matrix& a, const Matrix& b) {
    return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

MlpConfig small_mlp() {
    MlpConfig cfg;
    cfg.layer_widths = {8, 8, 8, 4};
    return cfg;
}

EncoderConfig small_encoder() {
    EncoderConfig cfg;
    cfg.embed_dim = 8;
    cfg.ffn_dim = 16;
    cfg.max_len = 24;
    return cfg;
}

std::vector<DomainName> names(std::initializer_list<const char*> raw) {
    std::vector<DomainName> out;
    for (const char* r : raw) out.push_back(normalize_domain(r));
    return out;
}

}  // namespace

TEST_CASE("fuse_forward affine identity and shape") {
    FusionHead head{Matrix(48, 2), {0.3, -0.3}};
    const Matrix logits = fuse_forward(Matrix(5, 32), Matrix(5, 16), head);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(logits(i, 0) == 0.3);
        CHECK(logits(i, 1) == -0.3);
    }
    const FusionHead h2 = head_init(48, 1);
    const Matrix l2 = fuse_forward(random_matrix(4, 32, 2), random_matrix(4, 16, 3), h2);
    CHECK(l2.rows() == 4);
    CHECK(l2.cols() == 2);

    try {
        fuse_forward(Matrix(4, 32), Matrix(3, 16), h2);
        FAIL("expected DimMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimMismatch);
    }
    CHECK_THROWS_AS(fuse_forward(Matrix(4, 30), Matrix(4, 16), h2), Error);
}

TEST_CASE("head gradient check") {
    FusionHead head = head_init(8 + 16, 4);
    Matrix text = random_matrix(6, 8, 5);
    Matrix num = random_matrix(6, 16, 6);
    const Matrix r = random_matrix(6, 2, 7);
    auto loss = [&] { return dot(fuse_forward(text, num, head), r); };
    FuseGradients g = fuse_backward(text, num, head, r);

    const auto check = [&](std::span<double> values, std::span<const double> analytic) {
        const auto numeric = oracle::central_difference(values, loss);
        return oracle::max_relative_error(analytic, numeric);
    };
    CHECK(check(head.weight.values(), g.head.weight.values()) < 1e-4);
    CHECK(check(head.bias, g.head.bias) < 1e-4);
    CHECK(check(text.values(), g.text_emb.values()) < 1e-4);
    CHECK(check(num.values(), g.num_emb.values()) < 1e-4);
}

TEST_CASE("cross entropy values") {
    const std::vector<int> one{1};
    const auto r = cross_entropy(Matrix(1, 2), one);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(r.grad(0, 0) == doctest::Approx(0.5));
    CHECK(r.grad(0, 1) == doctest::Approx(-0.5));

    Matrix big(1, 2);
    big(0, 0) = 1000.0;
    big(0, 1) = -1000.0;
    const std::vector<int> zero{0};
    const auto s = cross_entropy(big, zero);
    CHECK(std::isfinite(s.loss));
    CHECK(s.loss == doctest::Approx(0.0));
    const auto t = cross_entropy(big, one);
    CHECK(t.loss == doctest::Approx(2000.0));

    CHECK_THROWS_AS(cross_entropy(Matrix(2, 2), one), Error);
}

TEST_CASE("cross entropy gradient check") {
    Matrix logits = random_matrix(8, 2, 11, 3.0);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0, 0, 1};
    const auto r = cross_entropy(logits, labels);
    const auto numeric =
        oracle::central_difference(logits.values(), [&] { return cross_entropy(logits, labels).loss; }, 1e-5);
    CHECK(oracle::max_relative_error(r.grad.values(), numeric) < 1e-6);
}

TEST_CASE("softmax probabilities and monotonicity") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double l0 = rng.uniform(-50, 50), l1 = rng.uniform(-50, 50);
        const double ps = p_suspicious(std::array{l0, l1});
        const double pb = p_suspicious(std::array{l1, l0});
        CHECK(std::abs(ps + pb - 1.0) <= 1e-12);
        CHECK(ps >= 0.0);
        CHECK(ps <= 1.0);
    }
    // Raising the suspicious logit never lowers p_suspicious.
    double prev = 0.0;
    for (double l1 = -40.0; l1 <= 40.0; l1 += 0.25) {
        const double p = p_suspicious(std::array{0.7, l1});
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("feature standardization") {
    FeatureStats stats;
    stats.mean = {0.5, 10.0, 1.0, 1.0};
    stats.stddev = {0.25, 5.0, 1.0, 2.0};
    const std::vector<FeatureRow> rows{{0.75, 20, 3, 0}};
    const Matrix x = feature_matrix(rows, stats);
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(0, 1) == doctest::Approx(2.0));
    CHECK(x(0, 2) == doctest::Approx(2.0));
    CHECK(x(0, 3) == doctest::Approx(-0.5));
    stats.enabled = false;
    CHECK(feature_matrix(rows, stats)(0, 1) == 20.0);
}

TEST_CASE("predict determinism and threshold extremes") {
    for (ModelMode mode : {ModelMode::mlp_only, ModelMode::nlp_only, ModelMode::fused}) {
        const FusionModel m = model_init(mode, small_mlp(), small_encoder(), 21);
        const auto domains = names({"paypal-secure1", "example", "xq-login", "bank"});
        std::vector<FeatureRow> feats;
        for (const auto& d : domains) feats.push_back(extract_features(d, 0.4));
        const auto a = predict_batch(m, domains, feats, 0.5);
        const auto b = predict_batch(m, domains, feats, 0.5);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].p_suspicious == b[i].p_suspicious);
            CHECK(a[i].logits == b[i].logits);
            CHECK(a[i].label == (a[i].p_suspicious >= 0.5 ? kSuspicious : kBenign));
            CHECK(predict(m, domains[i], feats[i], 0.5).p_suspicious == a[i].p_suspicious);
        }
        for (const auto& v : predict_batch(m, domains, feats, 0.0)) CHECK(v.label == kSuspicious);
        for (const auto& v : predict_batch(m, domains, feats, 1.0 + 1e-9)) CHECK(v.label == kBenign);
    }
}

TEST_CASE("model modes and parsing") {
    CHECK(parse_model_mode("mlp") == ModelMode::mlp_only);
    CHECK(parse_model_mode("nlp") == ModelMode::nlp_only);
    CHECK(parse_model_mode("fused") == ModelMode::fused);
    CHECK_THROWS_AS(parse_model_mode("both"), Error);

    const FusionModel fused = model_init(ModelMode::fused, MlpConfig{}, EncoderConfig{}, 1);
    CHECK(fused.head.weight.rows() == 32 + 16);
    const FusionModel nlp = model_init(ModelMode::nlp_only, MlpConfig{}, EncoderConfig{}, 1);
    CHECK(nlp.head.weight.rows() == 32);
    CHECK(nlp.mlp.dense.empty());
    const FusionModel mlp = model_init(ModelMode::mlp_only, MlpConfig{}, EncoderConfig{}, 1);
    CHECK(mlp.head.weight.empty());
    CHECK(mlp.encoder.embedding.empty());
}

TEST_CASE("end-to-end fused gradient check") {
    FusionModel m = model_init(ModelMode::fused, small_mlp(), small_encoder(), 33);
    const auto domains = names({"paypal-login", "a", "xq7-bank", "example", "secure-update", "zz"});
    const Matrix x = random_matrix(domains.size(), 4, 34, 2.0);
    const std::vector<int> labels{1, 0, 1, 0, 1, 0};
    auto loss = [&] {
        return cross_entropy(model_forward(m, domains, x, Mode::train, 35).logits, labels).loss;
    };
    const auto fwd = model_forward(m, domains, x, Mode::train, 35);
    const auto ce = cross_entropy(fwd.logits, labels);
    ModelGradients g = model_backward(m, fwd, ce.grad);
    const auto checks = oracle::check_gradients(model_parameters(m), model_gradient_views(g), loss);
    CHECK(checks.size() == 18 + 19 + 2);
    for (const auto& c : checks) {
        INFO(c.name << " rel err " << c.max_rel_error);
        CHECK(c.max_rel_error < 1e-4);
    }
}

TEST_CASE("nlp and mlp mode gradients") {
    for (ModelMode mode : {ModelMode::nlp_only, ModelMode::mlp_only}) {
        FusionModel m = model_init(mode, small_mlp(), small_encoder(), 41);
        const auto domains = names({"abc-1", "login", "xqz", "bank"});
        const Matrix x = random_matrix(domains.size(), 4, 42, 2.0);
        const std::vector<int> labels{1, 0, 1, 0};
        auto loss = [&] {
            return cross_entropy(model_forward(m, domains, x, Mode::train, 5).logits, labels).loss;
        };
        const auto fwd = model_forward(m, domains, x, Mode::train, 5);
        ModelGradients g = model_backward(m, fwd, cross_entropy(fwd.logits, labels).grad);
        const auto checks = oracle::check_gradients(model_parameters(m), model_gradient_views(g), loss);
        CHECK(checks.size() == (mode == ModelMode::nlp_only ? 21u : 18u));
        INFO(to_string(mode));
        CHECK(oracle::worst(checks) < 1e-4);
    }
}
