#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <span>

#include "senderkeys/bytes.hpp"
#include "senderkeys/result.hpp"

namespace senderkeys::crypto {

/// Symmetric chain key, ratcheted forward one step per sent message.
/// The index counts how many ratchet steps produced it.
struct ChainKey {
  std::array<std::uint8_t, 32> secret{};
  std::uint64_t index = 0;

  bool operator==(const ChainKey&) const = default;
};

/// Single-use encryption key derived from a chain key. Never stored past one
/// encryption or decryption except in the skipped-key store.
struct MessageKey {
  std::array<std::uint8_t, 32> secret{};
  std::uint64_t index = 0;

  bool operator==(const MessageKey&) const = default;
};

// ECDSA/P-256: 33-byte compressed SEC1 point, 32-byte big-endian scalar.
using SigPublicKey = std::array<std::uint8_t, 33>;
using SigSecretKey = std::array<std::uint8_t, 32>;
using Seed32 = std::array<std::uint8_t, 32>;

struct SigKeyPair {
  SigPublicKey public_key{};
  SigSecretKey secret_key{};
};

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);
std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> data);

/// Message-key derivation: HMAC-SHA256 keyed by the chain key over the single
/// byte 0x01. The message key inherits the chain key's index.
MessageKey kdf_mk(const ChainKey& ck);

/// Chain ratchet: HMAC-SHA256 keyed by the chain key over the single byte
/// 0x02; the index advances by one.
ChainKey kdf_ck(const ChainKey& ck);

struct ExpandedKey {
  std::array<std::uint8_t, 32> enc_key{};
  std::array<std::uint8_t, 16> iv{};
};

/// Deterministic expansion of a message key into AES key + IV, HKDF-Expand
/// style with info labels "enc" and "iv". Safe because each mk is single-use.
ExpandedKey expand_mk(const MessageKey& mk);

/// AES-256-CBC with PKCS#7 padding. Deterministic given mk.
bytes enc(const MessageKey& mk, std::span<const std::uint8_t> plaintext);

/// Fails with Error::decryption_failure on bad length or invalid padding.
Result<bytes> dec(const MessageKey& mk, std::span<const std::uint8_t> ciphertext);

/// Deterministic keypair from a 32-byte seed (scalar = seed mod (n-1) + 1).
SigKeyPair sig_gen(const Seed32& rand);

/// ECDSA-SHA256, DER-encoded signature. Signing is randomized: two signatures
/// over the same payload differ.
bytes sign(const SigSecretKey& ssk, std::span<const std::uint8_t> msg);

/// Total: returns false (never throws) on malformed keys or signatures.
bool verify(const SigPublicKey& spk,
            std::span<const std::uint8_t> sig,
            std::span<const std::uint8_t> msg);

/// Randomness source handed to the protocol operations. Key generation draws
/// 32-byte blocks; the game swaps in a pinned source to model adversarial
/// randomness manipulation, so every draw must go through here.
class Rng {
public:
  virtual ~Rng() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Seed32 draw32()
  {
    Seed32 s{};
    fill(s);
    return s;
  }
};

/// Deterministic stream from a 64-bit seed (mt19937_64, portable across
/// platforms by the standard's specification).
class SeededRng final : public Rng {
public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

private:
  std::mt19937_64 gen_;
};

/// Always emits the same fixed bytes, cycled to the requested length.
class PinnedRng final : public Rng {
public:
  explicit PinnedRng(bytes fixed);
  void fill(std::span<std::uint8_t> out) override;

private:
  bytes fixed_;
};

} // namespace senderkeys::crypto
