#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "regscore/domain.hpp"
#include "regscore/fusion.hpp"
#include "regscore/kernels.hpp"
#include "regscore/similarity.hpp"

namespace regscore {

struct DatasetRow {
    DomainName domain;
    FeatureRow features;
    int label = kBenign;
};

struct Dataset {
    std::vector<DatasetRow> rows;
    FeatureStats stats;  ///< from the training partition; identity until standardize()

    std::size_t size() const noexcept { return rows.size(); }
    std::size_t count_label(int label) const;
};

struct LoadReport {
    std::size_t read = 0;            ///< data rows in the file
    std::size_t kept = 0;
    std::size_t duplicates = 0;      ///< later repeats of an earlier domain
    std::size_t in_registrants = 0;  ///< present verbatim in the registrant index
    bool enriched = false;           ///< file carried the four feature columns
};

struct LoadResult {
    Dataset dataset;
    LoadReport report;
};

/// Reads `domain_name,label` (optionally followed by the enriched columns
/// `similarity_score,length,digit_count,special_character_count`).
/// Rows are normalized, deduplicated keeping the first occurrence, and
/// dropped if the registrant index already holds them.
/// Throws Error{ParseError} ("name:line: ..."), Error{EmptyDataset}, Error{IoError}.
LoadResult load_dataset(const std::filesystem::path& path, const RegistrantIndex* registrants = nullptr,
                        bool strip_tld = false);
LoadResult load_dataset(std::istream& in, const std::string& name, const RegistrantIndex* registrants = nullptr,
                        bool strip_tld = false);

/// Writes the enriched CSV (six columns). Scores use round-trip precision.
void write_enriched_csv(const Dataset& ds, std::ostream& out);
void write_enriched_csv(const Dataset& ds, const std::filesystem::path& path);

/// Fills every row's features: best-match similarity plus the three counts.
/// Results land in input order for both execution paths.
void enrich(Dataset& ds, const RegistrantIndex& index, SimilarityMode mode,
            kernels::Exec exec = kernels::Exec::parallel);

struct SplitSpec {
    double train_frac = 0.70;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Split {
    Dataset train, val, test;
};

/// Seeded shuffle; sizes floor(n*train), floor(n*val), remainder.
/// Throws Error{DatasetTooSmall} if a partition would be empty.
Split split_dataset(const Dataset& ds, const SplitSpec& spec);

/// Per-feature mean and population stddev (floored at 1e-8) of `rows`.
FeatureStats compute_feature_stats(const Dataset& ds);

/// Computes stats on split.train and attaches them to all three partitions.
/// With enabled=false the stats are the identity transform.
void standardize(Split& split, bool enabled = true);

}  // namespace regscore
