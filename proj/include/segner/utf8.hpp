#ifndef SEGNER_UTF8_HPP
#define SEGNER_UTF8_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace segner::utf8 {

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Strict decoder: rejects overlong forms, surrogates and values past U+10FFFF.
std::u32string decode(std::string_view bytes);

std::string encode(char32_t cp);
std::string encode(std::u32string_view text);

bool is_valid(std::string_view bytes);

}  // namespace segner::utf8

#endif  // SEGNER_UTF8_HPP
