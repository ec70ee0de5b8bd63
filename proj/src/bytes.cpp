#include "senderkeys/bytes.hpp"

#include <algorithm>

namespace senderkeys {

bytes to_bytes(std::string_view s)
{
  return bytes(s.begin(), s.end());
}

std::string to_string(const bytes& b)
{
  return std::string(b.begin(), b.end());
}

std::string to_hex(std::span<const std::uint8_t> data)
{
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

static int hex_nibble(char c)
{
  if (c >= '0' && c <= '9') {
    return c - '0';
  }
  if (c >= 'a' && c <= 'f') {
    return c - 'a' + 10;
  }
  if (c >= 'A' && c <= 'F') {
    return c - 'A' + 10;
  }
  return -1;
}

std::optional<bytes> from_hex(std::string_view hex)
{
  if (hex.size() % 2 != 0) {
    return std::nullopt;
  }
  bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      return std::nullopt;
    }
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

bool contains(std::span<const std::uint8_t> haystack,
              std::span<const std::uint8_t> needle)
{
  if (needle.empty()) {
    return true;
  }
  auto it = std::search(
    haystack.begin(), haystack.end(), needle.begin(), needle.end());
  return it != haystack.end();
}

void append(bytes& out, std::span<const std::uint8_t> data)
{
  out.insert(out.end(), data.begin(), data.end());
}

void append_u64_be(bytes& out, std::uint64_t v)
{
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
  }
}

std::uint64_t read_u64_be(std::span<const std::uint8_t> in, std::size_t offset)
{
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; i++) {
    v = (v << 8) | in[offset + i];
  }
  return v;
}

} // namespace senderkeys
