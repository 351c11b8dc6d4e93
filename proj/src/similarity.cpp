#include "regscore/similarity.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "regscore/error.hpp"

namespace regscore {

namespace {

struct Range {
    std::size_t alo, ahi, blo, bhi;
};

// Longest block within a[alo, ahi) x b[blo, bhi) using a rolling suffix-length
// row. Scanning i then j ascending and only replacing on a strictly longer
// block yields the (smallest a_start, smallest b_start) tie-break.
MatchBlock longest_in(std::u32string_view a, std::u32string_view b, const Range& r,
                      std::vector<std::uint32_t>& prev, std::vector<std::uint32_t>& cur) {
    MatchBlock best{r.alo, r.blo, 0};
    const std::size_t width = r.bhi - r.blo;
    prev.assign(width + 1, 0);
    cur.assign(width + 1, 0);
    for (std::size_t i = r.alo; i < r.ahi; ++i) {
        const char32_t ai = a[i];
        for (std::size_t j = 0; j < width; ++j) {
            if (ai == b[r.blo + j]) {
                const std::uint32_t len = prev[j] + 1;
                cur[j + 1] = len;
                if (len > best.len) {
                    best.len = len;
                    best.a_start = i + 1 - len;
                    best.b_start = r.blo + j + 1 - len;
                }
            } else {
                cur[j + 1] = 0;
            }
        }
        std::swap(prev, cur);
    }
    return best;
}

}  // namespace

MatchBlock longest_match(std::u32string_view a, std::u32string_view b) {
    std::vector<std::uint32_t> prev, cur;
    MatchBlock m = longest_in(a, b, Range{0, a.size(), 0, b.size()}, prev, cur);
    if (m.len == 0) return MatchBlock{};
    return m;
}

std::size_t total_matches(std::u32string_view a, std::u32string_view b) {
    std::vector<std::uint32_t> prev, cur;
    std::vector<Range> pending{Range{0, a.size(), 0, b.size()}};
    std::size_t total = 0;
    while (!pending.empty()) {
        const Range r = pending.back();
        pending.pop_back();
        if (r.alo >= r.ahi || r.blo >= r.bhi) continue;
        const MatchBlock m = longest_in(a, b, r, prev, cur);
        if (m.len == 0) continue;
        total += m.len;
        pending.push_back(Range{r.alo, m.a_start, r.blo, m.b_start});
        pending.push_back(Range{m.a_start + m.len, r.ahi, m.b_start + m.len, r.bhi});
    }
    return total;
}

double ratio_from_matches(SimilarityMode mode, std::size_t matches, std::size_t len_a, std::size_t len_b) {
    if (len_a == 0 && len_b == 0) return 1.0;
    if (mode == SimilarityMode::paper) {
        if (len_a == 0 || len_b == 0) return 0.0;
        return static_cast<double>(matches) / static_cast<double>(std::max(len_a, len_b));
    }
    return 2.0 * static_cast<double>(matches) / static_cast<double>(len_a + len_b);
}

double paper_ratio(std::u32string_view a, std::u32string_view b) {
    return ratio_from_matches(SimilarityMode::paper, total_matches(a, b), a.size(), b.size());
}

double symmetric_ratio(std::u32string_view a, std::u32string_view b) {
    return ratio_from_matches(SimilarityMode::symmetric, total_matches(a, b), a.size(), b.size());
}

std::string_view to_string(SimilarityMode mode) {
    return mode == SimilarityMode::paper ? "paper" : "symmetric";
}

SimilarityMode parse_similarity_mode(std::string_view text) {
    if (text == "paper") return SimilarityMode::paper;
    if (text == "symmetric") return SimilarityMode::symmetric;
    throw Error(ErrorCode::InvalidConfig, "unknown similarity mode '" + std::string(text) + "'");
}

std::size_t frequency_slot(char32_t c) {
    if (c >= U'a' && c <= U'z') return c - U'a';
    if (c >= U'0' && c <= U'9') return 26 + (c - U'0');
    if (c == U'-') return 36;
    return 37;
}

CharFrequency char_frequency(std::u32string_view s) {
    CharFrequency f{};
    for (char32_t c : s) ++f[frequency_slot(c)];
    return f;
}

std::size_t frequency_bound(const CharFrequency& a, const CharFrequency& b) {
    std::size_t sum = 0;
    for (std::size_t k = 0; k < kFrequencySlots; ++k) sum += std::min(a[k], b[k]);
    return sum;
}

RegistrantIndex::RegistrantIndex(std::vector<DomainName> registrants) {
    std::sort(registrants.begin(), registrants.end(), [](const DomainName& x, const DomainName& y) {
        if (x.length() != y.length()) return x.length() < y.length();
        return x.text() < y.text();
    });
    registrants.erase(std::unique(registrants.begin(), registrants.end()), registrants.end());

    entries_.reserve(registrants.size());
    for (auto& d : registrants) {
        CharFrequency f = char_frequency(d.scalars());
        entries_.push_back(Entry{std::move(d), f});
    }
    if (entries_.empty()) return;

    min_length_ = entries_.front().name.length();
    max_length_ = entries_.back().name.length();
    band_offsets_.assign(max_length_ + 2, 0);
    for (const auto& e : entries_) ++band_offsets_[e.name.length() + 1];
    for (std::size_t len = 1; len < band_offsets_.size(); ++len) band_offsets_[len] += band_offsets_[len - 1];
}

std::span<const RegistrantIndex::Entry> RegistrantIndex::band(std::size_t length) const {
    if (entries_.empty() || length < min_length_ || length > max_length_) return {};
    const std::size_t lo = band_offsets_[length];
    const std::size_t hi = band_offsets_[length + 1];
    return {entries_.data() + lo, hi - lo};
}

bool RegistrantIndex::contains(const DomainName& d) const {
    const auto b = band(d.length());
    const auto it = std::lower_bound(b.begin(), b.end(), d.text(),
                                     [](const Entry& e, const std::string& t) { return e.name.text() < t; });
    return it != b.end() && it->name == d;
}

RegistrantIndex build_index(std::vector<DomainName> registrants) {
    return RegistrantIndex(std::move(registrants));
}

std::vector<DomainName> load_registrant_file(const std::filesystem::path& path, bool strip_tld) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open registrant file " + path.string());
    std::vector<DomainName> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        try {
            out.push_back(normalize_domain(line, strip_tld));
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

namespace {

struct Best {
    double score = -1.0;
    std::size_t matches = 0;
    const RegistrantIndex::Entry* entry = nullptr;

    // Would a candidate with this (upper bound on) score and text be able to
    // displace the current best?
    bool can_beat(double bound, const std::string& text) const {
        if (entry == nullptr) return true;
        if (bound > score) return true;
        return bound == score && text < entry->name.text();
    }

    void offer(double s, std::size_t m, const RegistrantIndex::Entry& e) {
        if (can_beat(s, e.name.text())) {
            score = s;
            matches = m;
            entry = &e;
        }
    }

    SimilarityResult result() const {
        if (entry == nullptr) return {};
        return SimilarityResult{score, entry->name, matches};
    }
};

}  // namespace

SimilarityResult best_match_exhaustive(const RegistrantIndex& index, const DomainName& query, SimilarityMode mode,
                                       SearchStats* stats) {
    const auto& q = query.scalars();
    Best best;
    for (const auto& e : index.entries()) {
        const std::size_t m = total_matches(q, e.name.scalars());
        best.offer(ratio_from_matches(mode, m, q.size(), e.name.length()), m, e);
    }
    if (stats) {
        stats->candidates += index.size();
        stats->scored += index.size();
    }
    return best.result();
}

SimilarityResult best_match(const RegistrantIndex& index, const DomainName& query, SimilarityMode mode,
                            SearchStats* stats) {
    if (index.empty()) return {};
    const auto& q = query.scalars();
    const std::size_t qlen = q.size();
    const CharFrequency qfreq = char_frequency(q);
    Best best;
    std::size_t scored = 0;

    // The length bound decreases monotonically as |len - qlen| grows on either
    // side, so bands are visited best-bound first from two cursors.
    auto band_bound = [&](std::size_t len) {
        return ratio_from_matches(mode, std::min(len, qlen), qlen, len);
    };
    std::size_t down = std::clamp(qlen, index.min_length(), index.max_length());
    std::size_t up = down + 1;
    bool down_open = true;
    bool up_open = up <= index.max_length();

    while (down_open || up_open) {
        std::size_t len;
        if (down_open && up_open) {
            len = band_bound(down) >= band_bound(up) ? down : up;
        } else {
            len = down_open ? down : up;
        }
        const double bound = band_bound(len);
        if (best.entry != nullptr && bound < best.score) break;

        for (const auto& e : index.band(len)) {
            const std::string& text = e.name.text();
            if (!best.can_beat(bound, text)) break;  // band is text-sorted
            const std::size_t fb = frequency_bound(qfreq, e.freq);
            if (!best.can_beat(ratio_from_matches(mode, fb, qlen, len), text)) continue;
            const std::size_t m = total_matches(q, e.name.scalars());
            ++scored;
            best.offer(ratio_from_matches(mode, m, qlen, len), m, e);
        }

        if (len == down) {
            if (down == index.min_length()) {
                down_open = false;
            } else {
                --down;
            }
        } else {
            if (up == index.max_length()) {
                up_open = false;
            } else {
                ++up;
            }
        }
    }

    if (stats) {
        stats->candidates += index.size();
        stats->scored += scored;
    }
    return best.result();
}

std::vector<SimilarityResult> best_match_batch(const RegistrantIndex& index, std::span<const DomainName> queries,
                                               SimilarityMode mode, kernels::Exec exec) {
    std::vector<SimilarityResult> out(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
    if (exec == kernels::Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = best_match(index, queries[i], mode);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = best_match(index, queries[i], mode);
    }
    return out;
}

}  // namespace regscore
