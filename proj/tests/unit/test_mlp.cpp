#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "regscore/error.hpp"
#include "regscore/mlp.hpp"
#include "regscore/rng.hpp"

using namespace regscore;

namespace {

MlpConfig small_config(std::uint64_t seed = 1) {
    MlpConfig cfg;
    cfg.layer_widths = {8, 8, 8, 4};
    cfg.seed = seed;
    return cfg;
}

Matrix random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, d);
    for (double& v : x.values()) v = rng.uniform(-2.0, 2.0);
    return x;
}

double dot(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

}  // namespace

TEST_CASE("mlp_init") {
    MlpConfig cfg;
    cfg.seed = 7;
    const MlpWeights a = mlp_init(cfg);
    const MlpWeights b = mlp_init(cfg);
    REQUIRE(a.dense.size() == 5);
    REQUIRE(a.norm.size() == 4);
    CHECK(a.dense[0].weight.rows() == 4);
    CHECK(a.dense[0].weight.cols() == 1024);
    CHECK(a.dense[1].weight.rows() == 1024);
    CHECK(a.dense[1].weight.cols() == 2056);
    CHECK(a.dense[2].weight.cols() == 512);
    CHECK(a.dense[3].weight.cols() == 16);
    CHECK(a.dense[4].weight.rows() == 16);
    CHECK(a.dense[4].weight.cols() == 2);
    for (std::size_t k = 0; k < 5; ++k) CHECK(a.dense[k].weight == b.dense[k].weight);

    const double limit = std::sqrt(6.0 / (4.0 + 1024.0));
    for (double v : a.dense[0].weight.values()) CHECK(std::abs(v) <= limit);
    CHECK(a.norm[2].running_var[5] == 1.0);
    CHECK(a.norm[2].gamma[5] == 1.0);

    cfg.input_dim = 0;
    CHECK_THROWS_AS(mlp_init(cfg), Error);
    cfg.input_dim = 4;
    cfg.layer_widths = {8, 8};
    CHECK_THROWS_AS(mlp_init(cfg), Error);
}

TEST_CASE("eval forward shapes and determinism") {
    MlpWeights w = mlp_init(small_config());
    const Matrix x = random_batch(4, 4, 3);
    const auto a = mlp_forward(std::as_const(w), x);
    const auto b = mlp_forward(std::as_const(w), x);
    CHECK(a.logits.rows() == 4);
    CHECK(a.logits.cols() == 2);
    CHECK(a.embedding.cols() == 4);
    CHECK(a.logits == b.logits);

    // Single-row eval is fine; train needs two rows.
    CHECK(mlp_forward(std::as_const(w), random_batch(1, 4, 4)).logits.rows() == 1);
    try {
        mlp_forward(w, random_batch(1, 4, 4), Mode::train, 0);
        FAIL("expected BatchTooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BatchTooSmall);
    }
    try {
        mlp_forward(std::as_const(w), random_batch(3, 5, 4));
        FAIL("expected DimMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimMismatch);
    }
}

TEST_CASE("full-size eval forward shapes") {
    MlpConfig cfg;
    const MlpWeights w = mlp_init(cfg);
    const auto acts = mlp_forward(w, random_batch(4, 4, 1));
    CHECK(acts.logits.rows() == 4);
    CHECK(acts.logits.cols() == 2);
    CHECK(acts.embedding.rows() == 4);
    CHECK(acts.embedding.cols() == 16);
}

TEST_CASE("train-mode batch normalization statistics") {
    MlpWeights w = mlp_init(small_config(5));
    const Matrix x = random_batch(16, 4, 8);
    const auto acts = mlp_forward(w, x, Mode::train, 99);
    for (const auto& cache : acts.hidden) {
        const Matrix& xh = cache.normalized;
        for (std::size_t j = 0; j < xh.cols(); ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < xh.rows(); ++i) mean += xh(i, j);
            mean /= static_cast<double>(xh.rows());
            double var = 0.0;
            for (std::size_t i = 0; i < xh.rows(); ++i) var += (xh(i, j) - mean) * (xh(i, j) - mean);
            var /= static_cast<double>(xh.rows());
            CHECK(std::abs(mean) < 1e-6);
            CHECK(std::abs(var - 1.0) < 1e-5);
        }
    }
    // Running stats moved away from their (0, 1) initial values.
    CHECK(w.norm[0].running_mean[0] != 0.0);
}

TEST_CASE("dropout preserves expectation") {
    Matrix base(1, 16);
    for (std::size_t j = 0; j < 16; ++j) base(0, j) = 0.5 + 0.1 * static_cast<double>(j);
    for (double p : {0.2, 0.3}) {
        std::vector<double> mean(16, 0.0);
        const int trials = 10000;
        for (int t = 0; t < trials; ++t) {
            Matrix v = base;
            Matrix scale;
            apply_dropout(v, p, mix_seed(123, t), scale);
            for (std::size_t j = 0; j < 16; ++j) mean[j] += v(0, j);
        }
        for (std::size_t j = 0; j < 16; ++j) {
            CHECK(std::abs(mean[j] / trials - base(0, j)) <= 0.02 * base(0, j));
        }
    }
}

TEST_CASE("backward matches central differences") {
    MlpWeights w = mlp_init(small_config(11));
    const Matrix x = random_batch(4, 4, 12);
    const Matrix r_logits = random_batch(4, 2, 13);
    const Matrix r_emb = random_batch(4, 4, 14);
    const std::uint64_t dropout_seed = 77;

    auto loss = [&] {
        const auto acts = mlp_forward(w, x, Mode::train, dropout_seed);
        return dot(acts.logits, r_logits) + dot(acts.embedding, r_emb);
    };

    const auto acts = mlp_forward(w, x, Mode::train, dropout_seed);
    MlpGradients g = mlp_backward(w, acts, MlpOutputGrad{r_logits, r_emb});
    const auto checks = oracle::check_gradients(mlp_parameters(w), mlp_gradient_views(g), loss);
    CHECK(checks.size() == 18);
    for (const auto& c : checks) {
        INFO(c.name << " rel err " << c.max_rel_error);
        CHECK(c.max_rel_error < 1e-4);
    }
}

TEST_CASE("backward edge cases") {
    MlpWeights w = mlp_init(small_config(2));
    const Matrix x = random_batch(4, 4, 3);
    const auto acts = mlp_forward(w, x, Mode::train, 5);

    MlpGradients zero = mlp_backward(w, acts, MlpOutputGrad{Matrix(4, 2), Matrix(4, 4)});
    for (const auto& p : mlp_gradient_views(zero)) {
        for (double v : p.values) CHECK(v == 0.0);
    }

    MlpGradients emb_only = mlp_backward(w, acts, MlpOutputGrad{Matrix(), random_batch(4, 4, 9)});
    for (double v : emb_only.dense[4].weight.values()) CHECK(v == 0.0);
    for (double v : emb_only.dense[4].bias) CHECK(v == 0.0);
    double nonzero = 0.0;
    for (double v : emb_only.dense[0].weight.values()) nonzero += std::abs(v);
    CHECK(nonzero > 0.0);

    const auto eval_acts = mlp_forward(std::as_const(w), x);
    try {
        mlp_backward(w, eval_acts, MlpOutputGrad{Matrix(4, 2), Matrix()});
        FAIL("expected StaleActivations");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StaleActivations);
    }
}
