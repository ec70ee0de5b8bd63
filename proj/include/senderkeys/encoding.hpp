#pragma once

#include <optional>

#include "senderkeys/bytes.hpp"
#include "senderkeys/core.hpp"
#include "senderkeys/result.hpp"

namespace senderkeys::encoding {

/// Canonical byte string covered by a frame signature. Binds ciphertext,
/// chain index, sender identity and, when present, the announced next
/// verification key:
///
///   u64be(|c|) || c || u64be(i) || u64be(|sender|) || sender
///   || (0x01 || u64be(33) || spk'  when announced, else 0x00)
bytes signing_payload(const core::Frame& f);

/// Frame wire format: 'F' || signing_payload fields || u64be(|sigma|) || sigma.
bytes encode_frame(const core::Frame& f);
std::optional<core::Frame> decode_frame(std::span<const std::uint8_t> wire);

/// Control wire format: 'C' || kind || u64be(seq) || actor || subjects || roster
/// (strings length-prefixed, lists count-prefixed).
bytes encode_control(const core::ControlMsg& t);
std::optional<core::ControlMsg> decode_control(std::span<const std::uint8_t> wire);

/// Distribution wire format: 'D' || from || to || spk || ck secret || u64be(index).
bytes encode_distribution(const core::SenderKeyDistribution& d);
std::optional<core::SenderKeyDistribution>
decode_distribution(std::span<const std::uint8_t> wire);

/// Deterministic serialization of a member's full state, secrets included.
/// This is the exposure format: byte-identical states compare equal, and
/// byte scans over it decide what key material a state still holds.
bytes serialize_state(const core::UserState& st);
Result<core::UserState> deserialize_state(std::span<const std::uint8_t> wire);

} // namespace senderkeys::encoding
