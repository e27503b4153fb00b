#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace webtwin::util {

std::string_view trim(std::string_view s);
std::string_view rtrim(std::string_view s);
std::string_view ltrim(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

// Splits on '\n'; a trailing newline does not produce an extra element.
std::vector<std::string_view> split_lines(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower(std::string_view s);

// FNV-1a, 64 bit.
class Fnv64 {
 public:
  Fnv64& bytes(std::string_view data);
  Fnv64& byte(uint8_t b);
  uint64_t value() const { return hash_; }
  std::string hex() const;

 private:
  uint64_t hash_ = 1469598103934665603ULL;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace webtwin::util
