#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace senderkeys {

using bytes = std::vector<std::uint8_t>;

bytes to_bytes(std::string_view s);
std::string to_string(const bytes& b);

std::string to_hex(std::span<const std::uint8_t> data);
std::optional<bytes> from_hex(std::string_view hex);

/// True if `needle` occurs as a contiguous subsequence of `haystack`.
bool contains(std::span<const std::uint8_t> haystack,
              std::span<const std::uint8_t> needle);

void append(bytes& out, std::span<const std::uint8_t> data);
void append_u64_be(bytes& out, std::uint64_t v);
std::uint64_t read_u64_be(std::span<const std::uint8_t> in, std::size_t offset);

} // namespace senderkeys
