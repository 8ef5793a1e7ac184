#ifndef RANKWEAVE_DETAIL_TEXT_HPP_
#define RANKWEAVE_DETAIL_TEXT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rankweave::detail {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

// Strict parsers: the whole field must be consumed. Return false on failure.
bool parse_double(std::string_view text, double* out);
bool parse_int64(std::string_view text, std::int64_t* out);

std::vector<std::string_view> split(std::string_view line, char sep);

// Drops a trailing '\r' so CRLF files parse like LF files.
std::string_view chomp(std::string_view line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// 64-bit FNV-1a, stable across platforms.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace rankweave::detail

#endif  // RANKWEAVE_DETAIL_TEXT_HPP_
