#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "regscore/dataset.hpp"
#include "regscore/error.hpp"
#include "regscore/metrics.hpp"
#include "regscore/rng.hpp"
#include "regscore/synthetic.hpp"

using namespace regscore;

namespace {

LoadResult load_text(const std::string& text, const RegistrantIndex* index = nullptr) {
    std::istringstream in(text);
    return load_dataset(in, "mem.csv", index);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

Dataset numbered(std::size_t n) {
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        const DomainName d = normalize_domain("d" + std::to_string(i));
        ds.rows.push_back({d, extract_features(d, 0.0), static_cast<int>(i % 2)});
    }
    return ds;
}

}  // namespace

TEST_CASE("load plain csv with dedup and registrant drop") {
    const RegistrantIndex idx{std::vector{normalize_domain("google")}};
    const auto r = load_text("domain_name,label\nPayPal-Login,1\nexample,0\npaypal-login,0\nGoogle,0\n\n", &idx);
    CHECK(r.report.read == 4);
    CHECK(r.report.duplicates == 1);
    CHECK(r.report.in_registrants == 1);
    CHECK(r.report.kept == 2);
    CHECK_FALSE(r.report.enriched);
    REQUIRE(r.dataset.size() == 2);
    CHECK(r.dataset.rows[0].domain.text() == "paypal-login");
    CHECK(r.dataset.rows[0].label == 1);  // first occurrence wins
    CHECK(r.dataset.rows[0].features.length == 12);
    CHECK(r.dataset.rows[0].features.special_char_count == 1);
}

TEST_CASE("load errors carry line numbers") {
    try {
        load_text("domain_name,label\nok,1\nbad,2\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("mem.csv:3:") != std::string::npos);
    }
    CHECK(code_of([] { load_text("name,label\na,1\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { load_text("domain_name,label\na,1,extra\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { load_text("domain_name,label\n   ,1\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { load_text("domain_name,label\n"); }) == ErrorCode::EmptyDataset);
    CHECK(code_of([] { load_text(""); }) == ErrorCode::ParseError);
    CHECK(code_of([] { load_dataset("/nonexistent/file.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("enriched csv round trip") {
    Dataset ds = make_text_pattern_dataset(50, 4);
    ds.rows[0].features.similarity_score = 5.0 / 7.0;
    ds.rows.push_back({normalize_domain("comma,name"), extract_features(normalize_domain("comma,name"), 0.25), 1});
    std::ostringstream out;
    write_enriched_csv(ds, out);
    const auto r = load_text(out.str());
    CHECK(r.report.enriched);
    REQUIRE(r.dataset.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(r.dataset.rows[i].domain == ds.rows[i].domain);
        CHECK(r.dataset.rows[i].label == ds.rows[i].label);
        CHECK(r.dataset.rows[i].features.similarity_score == ds.rows[i].features.similarity_score);
        CHECK(r.dataset.rows[i].features.length == ds.rows[i].features.length);
    }
    CHECK(code_of([] {
              load_text("domain_name,label,similarity_score,length,digit_count,special_character_count\n"
                        "a,1,1.5,1,0,0\n");
          }) == ErrorCode::ParseError);
}

TEST_CASE("enrich similarity column") {
    Dataset ds;
    for (const char* s : {"example", "zzzz", "ample"}) {
        const DomainName d = normalize_domain(s);
        ds.rows.push_back({d, extract_features(d, 0.0), 0});
    }
    const RegistrantIndex idx{std::vector{normalize_domain("ample"), normalize_domain("bank")}};
    enrich(ds, idx, SimilarityMode::paper);
    CHECK(ds.rows[0].features.similarity_score == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
    CHECK(ds.rows[1].features.similarity_score == 0.0);
    CHECK(ds.rows[2].features.similarity_score == 1.0);
    CHECK(ds.rows[0].features.length == 7);

    Dataset serial = ds;
    enrich(serial, idx, SimilarityMode::symmetric, kernels::Exec::serial);
    enrich(ds, idx, SimilarityMode::symmetric, kernels::Exec::parallel);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.rows[i].features.similarity_score == serial.rows[i].features.similarity_score);
    }

    enrich(ds, RegistrantIndex(), SimilarityMode::paper);
    for (const auto& r : ds.rows) CHECK(r.features.similarity_score == 0.0);
}

TEST_CASE("split sizes and determinism") {
    const auto sizes = [](std::size_t n) {
        const Split s = split_dataset(numbered(n), SplitSpec{});
        return std::array{s.train.size(), s.val.size(), s.test.size()};
    };
    CHECK(sizes(8900) == std::array<std::size_t, 3>{6230, 1335, 1335});
    CHECK(sizes(10) == std::array<std::size_t, 3>{7, 1, 2});
    CHECK(sizes(7) == std::array<std::size_t, 3>{4, 1, 2});
    CHECK(code_of([] { split_dataset(numbered(5), SplitSpec{}); }) == ErrorCode::DatasetTooSmall);
    CHECK(code_of([] { split_dataset(numbered(50), SplitSpec{0.5, 0.3, 0.3, 1}); }) == ErrorCode::InvalidConfig);

    const Dataset ds = numbered(200);
    for (std::size_t n = 7; n <= 200; ++n) {
        Dataset sub;
        sub.rows.assign(ds.rows.begin(), ds.rows.begin() + static_cast<long>(n));
        const Split s = split_dataset(sub, SplitSpec{0.7, 0.15, 0.15, n});
        std::set<std::string> all;
        for (const Dataset* p : {&s.train, &s.val, &s.test}) {
            for (const auto& r : p->rows) all.insert(r.domain.text());
        }
        CHECK(all.size() == n);
        CHECK(s.train.size() == n * 70 / 100);
        CHECK(s.val.size() == n * 15 / 100);
    }

    const Split a = split_dataset(ds, SplitSpec{0.7, 0.15, 0.15, 9});
    const Split b = split_dataset(ds, SplitSpec{0.7, 0.15, 0.15, 9});
    const Split c = split_dataset(ds, SplitSpec{0.7, 0.15, 0.15, 10});
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        same = same && a.train.rows[i].domain == b.train.rows[i].domain;
        differs = differs || !(a.train.rows[i].domain == c.train.rows[i].domain);
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("standardize uses training statistics only") {
    Dataset ds = make_separable_dataset(400, 3);
    for (auto& r : ds.rows) r.features.digit_count = 1;  // constant column
    Split s = split_dataset(ds, SplitSpec{0.7, 0.15, 0.15, 2});
    standardize(s);

    std::vector<FeatureRow> rows;
    for (const auto& r : s.train.rows) rows.push_back(r.features);
    const Matrix x = feature_matrix(rows, s.train.stats);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
        mean /= static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
        const double sd = std::sqrt(var / static_cast<double>(x.rows()));
        CHECK(std::abs(mean) < 1e-9);
        if (j == 2) {
            CHECK(sd == 0.0);  // constant column maps to zeros
            for (std::size_t i = 0; i < x.rows(); ++i) CHECK(x(i, j) == 0.0);
        } else {
            CHECK(std::abs(sd - 1.0) < 1e-6);
        }
    }
    CHECK(s.val.stats.mean == s.train.stats.mean);

    std::vector<FeatureRow> val_rows;
    for (const auto& r : s.val.rows) val_rows.push_back(r.features);
    const Matrix v = feature_matrix(val_rows, s.val.stats);
    double val_mean = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) val_mean += v(i, 1);
    CHECK(std::abs(val_mean / static_cast<double>(v.rows())) > 1e-6);

    standardize(s, false);
    CHECK_FALSE(s.train.stats.enabled);
}

TEST_CASE("synthetic generators") {
    const Dataset sep = make_separable_dataset(1000, 1);
    CHECK(sep.size() == 1000);
    for (const auto& r : sep.rows) {
        const bool rule = r.features.digit_count > 0 && r.features.length > 20;
        CHECK(r.label == (rule ? 1 : 0));
    }
    const Dataset txt = make_text_pattern_dataset(400, 1);
    CHECK(txt.count_label(1) == 200);
    for (const auto& r : txt.rows) {
        CHECK((r.domain.text().find("xq") != std::string::npos) == (r.label == 1));
    }
}

TEST_CASE("confusion and metrics") {
    const std::vector<int> ones(5, 1);
    const auto all = confusion(ones, ones);
    CHECK(all.tp == 5);
    CHECK(all.tn + all.fp + all.fn == 0);
    const std::vector<int> truth{1, 0, 1, 1, 0};
    const std::vector<int> flipped{0, 1, 0, 0, 1};
    const auto f = confusion(flipped, truth);
    CHECK(f.tp == 0);
    CHECK(f.tn == 0);
    const std::vector<int> short_truth{1};
    CHECK(code_of([&] { confusion(ones, short_truth); }) == ErrorCode::LengthMismatch);

    const Metrics m = metrics_from_confusion(ConfusionCounts{3, 4, 1, 2});
    CHECK(m.accuracy == doctest::Approx(0.7));
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.6));
    CHECK(m.f1 == doctest::Approx(2.0 * 0.45 / 1.35));

    const Metrics perfect = metrics_from_confusion(ConfusionCounts{4, 6, 0, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);

    const Metrics none = metrics_from_confusion(ConfusionCounts{0, 5, 0, 3});
    CHECK(none.precision == 0.0);
    CHECK(none.precision_degenerate);
    CHECK(none.f1_degenerate);
    CHECK(code_of([] { metrics_from_confusion(ConfusionCounts{}); }) == ErrorCode::EmptyEvaluation);

    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> p(1 + rng.below(50)), t(p.size());
        std::size_t tp = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = static_cast<int>(rng.below(2));
            t[i] = static_cast<int>(rng.below(2));
            tp += p[i] == 1 && t[i] == 1;
        }
        const auto c = confusion(p, t);
        CHECK(c.tp == tp);
        CHECK(c.total() == p.size());
        if (c.tp > 0) {
            const double alt = 2.0 * c.tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
            CHECK(metrics_from_confusion(c).f1 == doctest::Approx(alt).epsilon(1e-12));
        }
    }
}
