#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace recprompt::text {

// Latin-1 bytes to UTF-8. Every byte maps to exactly one code point.
std::string latin1_to_utf8(std::string_view latin1);

// Inverse of latin1_to_utf8. Fails with a data error on code points > 0xFF.
std::string utf8_to_latin1(std::string_view utf8);

std::size_t utf8_length(std::string_view utf8);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Splits on a multi-character separator ("::" for MovieLens-1M).
std::vector<std::string_view> split(std::string_view line, std::string_view sep);

// Splits one RFC-4180 record. Quoted fields may contain the delimiter and
// doubled quotes. Returns false when the line has an unterminated quote.
bool split_quoted(std::string_view line, char delimiter,
                  std::vector<std::string>& fields);

// Quotes a field only when it contains the delimiter, a quote, or CR/LF.
std::string quote_if_needed(std::string_view field, char delimiter);

std::string strip_cr(std::string_view line);

// Deterministic 64-bit mixing (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s, std::uint64_t seed);

}  // namespace recprompt::text
