#include "regscore/synthetic.hpp"

#include <unordered_set>

#include "regscore/rng.hpp"

namespace regscore {

namespace {

std::string letters(Rng& rng, std::size_t len) {
    std::string s(len, 'a');
    for (char& c : s) c = static_cast<char>('a' + rng.below(26));
    return s;
}

std::string digits(Rng& rng, std::size_t len) {
    std::string s(len, '0');
    for (char& c : s) c = static_cast<char>('0' + rng.below(10));
    return s;
}

/// Adds `row` unless its text was already used.
bool add_unique(Dataset& ds, std::unordered_set<std::string>& seen, const std::string& text, int label, Rng& rng) {
    if (!seen.insert(text).second) return false;
    const DomainName d = normalize_domain(text);
    ds.rows.push_back({d, extract_features(d, rng.uniform()), label});
    return true;
}

}  // namespace

Dataset make_separable_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    std::unordered_set<std::string> seen;
    while (ds.rows.size() < n) {
        const std::size_t cell = ds.rows.size() % 4;
        const bool has_digit = cell & 1u;
        const bool is_long = cell & 2u;
        const std::size_t target = is_long ? 21 + rng.below(15) : 6 + rng.below(15);
        const std::size_t n_digits = has_digit ? 1 + rng.below(3) : 0;
        const bool hyphen = target >= 10 && rng.below(3) == 0;

        std::string body = letters(rng, target - n_digits - (hyphen ? 1 : 0));
        if (hyphen) body.insert(1 + rng.below(body.size() - 1), "-");
        if (n_digits > 0) body.insert(rng.below(body.size() + 1), digits(rng, n_digits));
        if (body.front() == '-' || body.back() == '-') continue;
        add_unique(ds, seen, body, has_digit && is_long ? 1 : 0, rng);
    }
    return ds;
}

Dataset make_text_pattern_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    std::unordered_set<std::string> seen;
    while (ds.rows.size() < n) {
        const int label = static_cast<int>(ds.rows.size() % 2);
        std::string body = letters(rng, 6 + rng.below(13));
        if (rng.below(4) == 0) body += "-" + letters(rng, 3 + rng.below(4));
        if (rng.below(3) == 0) body += digits(rng, 1 + rng.below(3));

        std::string pair = "xq";
        if (label == 0) {
            do {
                pair = letters(rng, 2);
            } while (pair == "xq");
        }
        body.insert(rng.below(body.size() + 1), pair);
        const bool has_xq = body.find("xq") != std::string::npos;
        if (has_xq != (label == 1)) continue;
        add_unique(ds, seen, body, label, rng);
    }
    return ds;
}

}  // namespace regscore
