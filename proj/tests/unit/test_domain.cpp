#include "doctest.h"

#include "regscore/domain.hpp"
#include "regscore/error.hpp"
#include "regscore/rng.hpp"

using namespace regscore;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected regscore::Error");
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("normalize_domain examples") {
    CHECK(normalize_domain("LInkedIn").text() == "linkedin");
    CHECK(normalize_domain("example.com", true).text() == "example");
    CHECK(normalize_domain("  ample ").text() == "ample");
    CHECK(normalize_domain("a.b.co.uk", true).text() == "a.b.co");
    CHECK(normalize_domain("example.com", false).text() == "example.com");
    CHECK(normalize_domain("nodot", true).text() == "nodot");
}

TEST_CASE("normalize_domain lowercases beyond ASCII") {
    const auto d = normalize_domain("MÜNCHEN-Straße");
    CHECK(d.scalars() == U"münchen-straße");
    CHECK(d.length() == 14);
}

TEST_CASE("normalize_domain errors") {
    CHECK(code_of([] { normalize_domain("   "); }) == ErrorCode::EmptyDomain);
    CHECK(code_of([] { normalize_domain(""); }) == ErrorCode::EmptyDomain);
    CHECK(code_of([] { normalize_domain(".com", true); }) == ErrorCode::EmptyDomain);
    CHECK(code_of([] { normalize_domain("bad\x01name"); }) == ErrorCode::InvalidDomain);
    CHECK(code_of([] { normalize_domain("tab\tinside"); }) == ErrorCode::InvalidDomain);
    CHECK(code_of([] { normalize_domain("\xC3"); }) == ErrorCode::InvalidDomain);
    CHECK(code_of([] { normalize_domain("\xED\xA0\x80"); }) == ErrorCode::InvalidDomain);  // surrogate
    CHECK(code_of([] { normalize_domain("\xC0\xAF"); }) == ErrorCode::InvalidDomain);      // overlong
}

TEST_CASE("classify_char") {
    CHECK(classify_char(U'7') == CharClass::Digit);
    CHECK(classify_char(U'@') == CharClass::Special);
    CHECK(classify_char(U'-') == CharClass::Special);
    CHECK(classify_char(U'.') == CharClass::Special);
    CHECK(classify_char(U'_') == CharClass::Special);
    CHECK(classify_char(U'q') == CharClass::Letter);
    CHECK(classify_char(U'ü') == CharClass::Letter);
    CHECK(classify_char(U'٣') == CharClass::Special);  // Arabic-Indic digit: not ASCII
    CHECK(classify_char(U'中') == CharClass::Letter);
}

TEST_CASE("extract_features on the worked strings") {
    auto f = extract_features(normalize_domain("accountupdate123"), 0.0);
    CHECK(f.length == 16);
    CHECK(f.digit_count == 3);
    CHECK(f.special_char_count == 0);

    f = extract_features(normalize_domain("b@nkofamerica"), 0.0);
    CHECK(f.length == 13);
    CHECK(f.digit_count == 0);
    CHECK(f.special_char_count == 1);

    f = extract_features(normalize_domain("securelogin-examplebank-accountverification"), 0.25);
    CHECK(f.length == 43);  // 11 + 1 + 11 + 1 + 19
    CHECK(f.digit_count == 0);
    CHECK(f.special_char_count == 2);
    CHECK(f.similarity_score == 0.25);
}

TEST_CASE("properties over random domains") {
    const std::u32string alphabet = U"abcXYZ019-@._é中 ";
    Rng rng(11);
    for (int iter = 0; iter < 2000; ++iter) {
        std::u32string s;
        const auto n = 1 + rng.below(20);
        for (std::uint64_t i = 0; i < n; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
        const std::string raw = encode_utf8(s);
        DomainName d = [&] {
            try {
                return normalize_domain(raw);
            } catch (const Error&) {
                return normalize_domain("fallback");
            }
        }();

        // idempotence
        CHECK(normalize_domain(d.text()) == d);
        // no uppercase, no surrounding whitespace
        for (char32_t c : d.scalars()) CHECK_FALSE((c >= U'A' && c <= U'Z'));
        CHECK(d.scalars().front() != U' ');
        CHECK(d.scalars().back() != U' ');

        const FeatureRow f = extract_features(d, 0.5);
        CHECK(f.length == d.length());
        std::size_t letters = 0;
        for (char32_t c : d.scalars()) letters += classify_char(c) == CharClass::Letter;
        CHECK(letters + f.digit_count + f.special_char_count == f.length);
    }
}

TEST_CASE("utf8 round trip") {
    const std::u32string s = U"aé中😀-";
    const auto back = decode_utf8(encode_utf8(s));
    REQUIRE(back.has_value());
    CHECK(*back == s);
}
