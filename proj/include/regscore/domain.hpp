#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace regscore {

/// Decodes UTF-8 into Unicode scalar values. Returns nullopt on malformed
/// input (overlongs, surrogates, truncated sequences).
std::optional<std::u32string> decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view scalars);

/// A normalized registration-time domain label: lowercase, trimmed, non-empty,
/// no TLD. Only constructible through `normalize_domain`.
class DomainName {
public:
    const std::string& text() const noexcept { return utf8_; }
    const std::u32string& scalars() const noexcept { return scalars_; }
    std::size_t length() const noexcept { return scalars_.size(); }

    friend bool operator==(const DomainName& a, const DomainName& b) { return a.utf8_ == b.utf8_; }
    friend auto operator<=>(const DomainName& a, const DomainName& b) { return a.utf8_ <=> b.utf8_; }

private:
    friend DomainName normalize_domain(std::string_view raw, bool strip_tld);
    DomainName(std::string utf8, std::u32string scalars)
        : utf8_(std::move(utf8)), scalars_(std::move(scalars)) {}

    std::string utf8_;
    std::u32string scalars_;
};

/// Lowercases and trims `raw`; with `strip_tld` drops the last '.'-separated
/// label when at least one '.' is present.
/// Throws Error{InvalidDomain} on control characters or malformed UTF-8,
/// Error{EmptyDomain} when nothing is left.
DomainName normalize_domain(std::string_view raw, bool strip_tld = false);

enum class CharClass { Letter, Digit, Special };

/// Digit is ASCII 0-9 only; Letter is any Unicode general category L*;
/// everything else (hyphen, '@', '.', '_', ...) is Special.
CharClass classify_char(char32_t c);

struct FeatureRow {
    double similarity_score = 0.0;
    std::uint32_t length = 0;
    std::uint32_t digit_count = 0;
    std::uint32_t special_char_count = 0;
};

inline constexpr std::size_t kNumFeatures = 4;

/// Counts scalar classes of `d` and attaches `similarity` (must be in [0,1]).
FeatureRow extract_features(const DomainName& d, double similarity);

}  // namespace regscore
