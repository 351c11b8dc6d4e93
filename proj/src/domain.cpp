#include "regscore/domain.hpp"

#include <unicode/uchar.h>

#include "regscore/error.hpp"

namespace regscore {

std::optional<std::u32string> decode_utf8(std::string_view bytes) {
    std::u32string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto b0 = static_cast<unsigned char>(bytes[i]);
        char32_t cp = 0;
        std::size_t extra = 0;
        char32_t min_cp = 0;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            extra = 1;
            min_cp = 0x80;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            extra = 2;
            min_cp = 0x800;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            extra = 3;
            min_cp = 0x10000;
        } else {
            return std::nullopt;
        }
        if (i + extra >= bytes.size() && extra > 0) return std::nullopt;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto bk = static_cast<unsigned char>(bytes[i + k]);
            if ((bk & 0xC0) != 0x80) return std::nullopt;
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (extra > 0 && cp < min_cp) return std::nullopt;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

std::string encode_utf8(std::u32string_view scalars) {
    std::string out;
    out.reserve(scalars.size());
    for (char32_t c : scalars) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

namespace {

bool is_ascii_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

}  // namespace

DomainName normalize_domain(std::string_view raw, bool strip_tld) {
    auto decoded = decode_utf8(raw);
    if (!decoded) throw Error(ErrorCode::InvalidDomain, "malformed UTF-8");

    std::u32string_view view(*decoded);
    while (!view.empty() && is_ascii_space(view.front())) view.remove_prefix(1);
    while (!view.empty() && is_ascii_space(view.back())) view.remove_suffix(1);

    std::u32string text;
    text.reserve(view.size());
    for (char32_t c : view) {
        if (u_iscntrl(static_cast<UChar32>(c))) {
            throw Error(ErrorCode::InvalidDomain, "control character in domain");
        }
        text.push_back(static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))));
    }

    if (strip_tld) {
        const auto dot = text.rfind(U'.');
        if (dot != std::u32string::npos) text.resize(dot);
    }
    if (text.empty()) throw Error(ErrorCode::EmptyDomain, "domain is empty after normalization");

    std::string utf8 = encode_utf8(text);
    return DomainName(std::move(utf8), std::move(text));
}

CharClass classify_char(char32_t c) {
    if (c >= U'0' && c <= U'9') return CharClass::Digit;
    if (c <= 0x10FFFF && u_isalpha(static_cast<UChar32>(c))) return CharClass::Letter;
    return CharClass::Special;
}

FeatureRow extract_features(const DomainName& d, double similarity) {
    FeatureRow row;
    row.similarity_score = similarity;
    row.length = static_cast<std::uint32_t>(d.length());
    for (char32_t c : d.scalars()) {
        switch (classify_char(c)) {
            case CharClass::Digit: ++row.digit_count; break;
            case CharClass::Special: ++row.special_char_count; break;
            case CharClass::Letter: break;
        }
    }
    return row;
}

}  // namespace regscore
