#include "regscore/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "regscore/error.hpp"
#include "regscore/rng.hpp"

namespace regscore {

std::size_t Dataset::count_label(int label) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [label](const DatasetRow& r) { return r.label == label; }));
}

namespace {

constexpr const char* kEnrichedHeader =
    "domain_name,label,similarity_score,length,digit_count,special_character_count";

/// Splits one CSV record. Double-quoted fields may contain commas; "" is a literal quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"' && fields.back().empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) return std::nullopt;
    return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

[[noreturn]] void parse_error(const std::string& name, std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ParseError, name + ":" + std::to_string(line) + ": " + what);
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

LoadResult load_dataset(std::istream& in, const std::string& name, const RegistrantIndex* registrants,
                        bool strip_tld) {
    LoadResult result;
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    std::unordered_set<std::string> seen;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (line == "domain_name,label") {
                columns = 2;
            } else if (line == kEnrichedHeader) {
                columns = 6;
                result.report.enriched = true;
            } else {
                parse_error(name, line_no, "expected header 'domain_name,label' or '" + std::string(kEnrichedHeader) +
                                               "', got '" + line + "'");
            }
            continue;
        }
        if (line.empty()) continue;

        const auto fields = split_csv(line);
        if (!fields) parse_error(name, line_no, "unterminated quoted field");
        if (fields->size() != columns) {
            parse_error(name, line_no,
                        "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields->size()));
        }
        ++result.report.read;

        DomainName domain = [&] {
            try {
                return normalize_domain((*fields)[0], strip_tld);
            } catch (const Error& e) {
                parse_error(name, line_no, e.what());
            }
        }();
        int label = 0;
        if (!parse_number((*fields)[1], label) || (label != 0 && label != 1)) {
            parse_error(name, line_no, "label must be 0 or 1, got '" + (*fields)[1] + "'");
        }

        DatasetRow row{domain, extract_features(domain, 0.0), label};
        if (columns == 6) {
            FeatureRow& f = row.features;
            if (!parse_number((*fields)[2], f.similarity_score) || !(f.similarity_score >= 0.0) ||
                !(f.similarity_score <= 1.0)) {
                parse_error(name, line_no, "similarity_score must be a number in [0, 1]");
            }
            if (!parse_number((*fields)[3], f.length) || !parse_number((*fields)[4], f.digit_count) ||
                !parse_number((*fields)[5], f.special_char_count)) {
                parse_error(name, line_no, "length/digit_count/special_character_count must be non-negative integers");
            }
            if (f.digit_count + f.special_char_count > f.length) {
                parse_error(name, line_no, "digit_count + special_character_count exceeds length");
            }
        }

        if (!seen.insert(domain.text()).second) {
            ++result.report.duplicates;
            continue;
        }
        if (registrants && registrants->contains(domain)) {
            ++result.report.in_registrants;
            continue;
        }
        result.dataset.rows.push_back(std::move(row));
    }
    if (line_no == 0) throw Error(ErrorCode::ParseError, name + ":1: missing header");
    result.report.kept = result.dataset.rows.size();
    if (result.dataset.rows.empty()) throw Error(ErrorCode::EmptyDataset, name + ": no usable rows");
    return result;
}

LoadResult load_dataset(const std::filesystem::path& path, const RegistrantIndex* registrants, bool strip_tld) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open dataset " + path.string());
    return load_dataset(in, path.string(), registrants, strip_tld);
}

void write_enriched_csv(const Dataset& ds, std::ostream& out) {
    out << kEnrichedHeader << '\n';
    char score[32];
    for (const DatasetRow& r : ds.rows) {
        std::snprintf(score, sizeof score, "%.17g", r.features.similarity_score);
        out << csv_field(r.domain.text()) << ',' << r.label << ',' << score << ',' << r.features.length << ','
            << r.features.digit_count << ',' << r.features.special_char_count << '\n';
    }
}

void write_enriched_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    write_enriched_csv(ds, out);
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void enrich(Dataset& ds, const RegistrantIndex& index, SimilarityMode mode, kernels::Exec exec) {
    std::vector<DomainName> queries;
    queries.reserve(ds.rows.size());
    for (const DatasetRow& r : ds.rows) queries.push_back(r.domain);
    const auto matches = best_match_batch(index, queries, mode, exec);
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        ds.rows[i].features = extract_features(ds.rows[i].domain, matches[i].score);
    }
}

void SplitSpec::validate() const {
    const bool positive = train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0;
    if (!positive || std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidConfig, "split fractions must be positive and sum to 1");
    }
}

Split split_dataset(const Dataset& ds, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = ds.rows.size();
    // The epsilon absorbs representation error such as 100 * 0.7 = 70.00000000000001
    // or 0.15 * 20 landing just below 3.
    const auto portion = [n](double frac) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 1e-9));
    };
    const std::size_t n_train = portion(spec.train_frac);
    const std::size_t n_val = portion(spec.val_frac);
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw Error(ErrorCode::DatasetTooSmall,
                    std::to_string(n) + " rows cannot fill three non-empty partitions with these fractions");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    Split out;
    for (Dataset* part : {&out.train, &out.val, &out.test}) part->stats = ds.stats;
    for (std::size_t k = 0; k < n; ++k) {
        Dataset& part = k < n_train ? out.train : k < n_train + n_val ? out.val : out.test;
        part.rows.push_back(ds.rows[order[k]]);
    }
    return out;
}

FeatureStats compute_feature_stats(const Dataset& ds) {
    FeatureStats stats;
    if (ds.rows.empty()) throw Error(ErrorCode::EmptyDataset, "feature statistics need at least one row");
    FeatureStats identity;
    identity.enabled = false;
    std::vector<FeatureRow> rows;
    rows.reserve(ds.rows.size());
    for (const DatasetRow& r : ds.rows) rows.push_back(r.features);
    const Matrix x = feature_matrix(rows, identity);
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
        stats.mean[j] = mean;
        stats.stddev[j] = std::max(std::sqrt(var / n), 1e-8);
    }
    return stats;
}

void standardize(Split& split, bool enabled) {
    FeatureStats stats;
    if (enabled) {
        stats = compute_feature_stats(split.train);
    } else {
        stats.enabled = false;
    }
    split.train.stats = stats;
    split.val.stats = stats;
    split.test.stats = stats;
}

}  // namespace regscore
