#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "regscore/domain.hpp"
#include "regscore/kernels.hpp"

namespace regscore {

// ---------------------------------------------------------------------------
// Gestalt (Ratcliff-Obershelp) matching
// ---------------------------------------------------------------------------

struct MatchBlock {
    std::size_t a_start = 0;
    std::size_t b_start = 0;
    std::size_t len = 0;

    friend bool operator==(const MatchBlock&, const MatchBlock&) = default;
};

/// Longest common contiguous block of `a` and `b`. Ties go to the smallest
/// a_start, then the smallest b_start. No junk heuristics.
MatchBlock longest_match(std::u32string_view a, std::u32string_view b);

/// Matched scalar count M: the longest block plus, recursively, the matches in
/// the unmatched left and right remainders.
std::size_t total_matches(std::u32string_view a, std::u32string_view b);

/// M / max(|a|, |b|). 1.0 for two empty inputs, 0.0 if exactly one is empty.
double paper_ratio(std::u32string_view a, std::u32string_view b);

/// 2M / (|a| + |b|). 1.0 for two empty inputs.
double symmetric_ratio(std::u32string_view a, std::u32string_view b);

enum class SimilarityMode { paper, symmetric };

std::string_view to_string(SimilarityMode mode);
/// Accepts "paper" or "symmetric"; throws Error{InvalidConfig} otherwise.
SimilarityMode parse_similarity_mode(std::string_view text);

/// Ratio for a known match count. Shared by every scoring path so that equal
/// rationals compare equal bit for bit.
double ratio_from_matches(SimilarityMode mode, std::size_t matches, std::size_t len_a, std::size_t len_b);

// ---------------------------------------------------------------------------
// Registrant index
// ---------------------------------------------------------------------------

/// 26 letters, 10 digits, hyphen, and one shared slot for everything else.
inline constexpr std::size_t kFrequencySlots = 38;
using CharFrequency = std::array<std::uint32_t, kFrequencySlots>;

std::size_t frequency_slot(char32_t c);
CharFrequency char_frequency(std::u32string_view s);
/// Sum over slots of min(a, b); an upper bound on total_matches.
std::size_t frequency_bound(const CharFrequency& a, const CharFrequency& b);

struct SimilarityResult {
    double score = 0.0;
    std::optional<DomainName> matched_registrant;
    std::size_t total_matched = 0;
};

struct SearchStats {
    std::size_t candidates = 0;  ///< index entries considered
    std::size_t scored = 0;      ///< entries for which total_matches was computed
};

/// Registrants sorted by (length, text) and grouped into one band per length.
/// Immutable after construction.
class RegistrantIndex {
public:
    struct Entry {
        DomainName name;
        CharFrequency freq;
    };

    RegistrantIndex() = default;
    /// Duplicates are collapsed.
    explicit RegistrantIndex(std::vector<DomainName> registrants);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    /// Entries whose scalar length is exactly `length` (possibly empty).
    std::span<const Entry> band(std::size_t length) const;
    std::size_t min_length() const noexcept { return min_length_; }
    std::size_t max_length() const noexcept { return max_length_; }

    bool contains(const DomainName& d) const;

private:
    std::vector<Entry> entries_;
    std::vector<std::size_t> band_offsets_;  // band_offsets_[len] .. band_offsets_[len + 1]
    std::size_t min_length_ = 0;
    std::size_t max_length_ = 0;
};

RegistrantIndex build_index(std::vector<DomainName> registrants);

/// One domain per line; blank lines and '#' comments skipped. Each line goes
/// through normalize_domain. Throws Error{ParseError} with the line number.
std::vector<DomainName> load_registrant_file(const std::filesystem::path& path, bool strip_tld = false);

/// Highest-ratio registrant, ties to the lexicographically smallest text.
/// Scans length bands outward from |query| and skips entries whose length or
/// character-frequency bound cannot beat the current best. Exact.
SimilarityResult best_match(const RegistrantIndex& index, const DomainName& query, SimilarityMode mode,
                            SearchStats* stats = nullptr);

/// Same contract as best_match without pruning; scores every entry.
SimilarityResult best_match_exhaustive(const RegistrantIndex& index, const DomainName& query, SimilarityMode mode,
                                       SearchStats* stats = nullptr);

/// best_match for every query, results in input order.
std::vector<SimilarityResult> best_match_batch(const RegistrantIndex& index, std::span<const DomainName> queries,
                                               SimilarityMode mode, kernels::Exec exec = kernels::Exec::parallel);

}  // namespace regscore
