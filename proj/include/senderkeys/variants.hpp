#pragma once

#include <optional>

#include "senderkeys/core.hpp"
#include "senderkeys/crypto.hpp"
#include "senderkeys/result.hpp"

namespace senderkeys::variants {

/// Digest over every secret field of the state (signing key, chain keys,
/// stored message keys), in serialization order. Absent when the state holds
/// no secrets at all.
std::optional<std::array<std::uint8_t, 32>>
secret_state_digest(const core::UserState& st);

/// Hardened key-generation seed: H(rand || secret-state digest). An adversary
/// who controls the randomness but not the state cannot predict the result.
/// Falls back to rand alone when the state holds no secrets yet.
crypto::Seed32 hardened_seed(const crypto::Seed32& rand,
                             const core::UserState& st);

struct UpdateResult {
  core::ControlMsg control;
  std::vector<core::SenderKeyDistribution> distributions;
  core::UserState st;
};

/// Proactive own-key refresh: regenerate the sender key without a membership
/// change and redistribute it to the whole group. Peers learn of it through
/// the distribution; the control message only marks the event on the log.
/// Not available in single-chain mode (the chain is group-owned there).
Result<UpdateResult> exec_update(const core::UserState& st, crypto::Rng& rng);

/// Named configurations for the variant toggles.
core::ProtocolConfig config_for(core::Variant v,
                                std::uint64_t n_max = 2000,
                                std::uint64_t sig_block = 1);

} // namespace senderkeys::variants
