#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "senderkeys/bytes.hpp"
#include "senderkeys/crypto.hpp"
#include "senderkeys/result.hpp"

namespace senderkeys::core {

using UserId = std::string;

enum class Variant {
  baseline,
  sig_ratchet,
  hardened_rand,
  single_chain,
  combined, // sig_ratchet + hardened_rand
};

std::string to_string(Variant v);
std::optional<Variant> variant_from_string(std::string_view s);

struct ProtocolConfig {
  Variant variant = Variant::baseline;
  std::uint64_t n_max = 2000;   // skipped-key capacity per sender
  std::uint64_t sig_block = 1;  // messages per signature generation

  bool sig_ratchet() const
  {
    return variant == Variant::sig_ratchet || variant == Variant::combined;
  }
  bool hardened_rand() const
  {
    return variant == Variant::hardened_rand || variant == Variant::combined;
  }
  bool single_chain() const { return variant == Variant::single_chain; }

  bool operator==(const ProtocolConfig&) const = default;
};

/// A member's sender key as shared with the group: verification key plus
/// chain key. In single-chain mode the chain part is the shared group chain.
struct SenderKey {
  crypto::SigPublicKey spk{};
  crypto::ChainKey ck;

  bool operator==(const SenderKey&) const = default;
};

/// Receiving-side record for one peer.
struct PeerEntry {
  crypto::SigPublicKey spk{};
  crypto::ChainKey chain;   // unused (zero) in single-chain mode
  std::uint64_t sig_gen = 0;
  std::optional<crypto::SigPublicKey> prev_spk; // sig-ratchet verify window

  bool operator==(const PeerEntry&) const = default;
};

/// Application ciphertext as sent over the delivery service:
/// C = (c, i, sender, sigma). next_spk is the sig-ratchet announcement and
/// sits inside the signed payload when present.
struct Frame {
  bytes ciphertext;
  std::uint64_t index = 0;
  UserId sender;
  bytes signature;
  std::optional<crypto::SigPublicKey> next_spk;

  bool operator==(const Frame&) const = default;
};

enum class ControlKind { create, add, remove, update };

std::string to_string(ControlKind k);

/// Membership-change notification T. The delivery service assigns seq on
/// submission. roster is the post-change roster snapshot; it lets a freshly
/// added member learn the full membership (existing members validate it
/// against their own view instead of trusting it).
struct ControlMsg {
  ControlKind kind = ControlKind::create;
  UserId actor;
  std::vector<UserId> subjects;
  std::uint64_t seq = 0;
  std::vector<UserId> roster;

  bool operator==(const ControlMsg&) const = default;
};

/// Sender-key material in transit over a two-party channel. Never touches
/// the delivery service.
struct SenderKeyDistribution {
  UserId from;
  UserId to;
  SenderKey key;

  bool operator==(const SenderKeyDistribution&) const = default;
};

/// One member's full protocol state. Pure value: operations take a state and
/// return a new one, leaving the input untouched on errors.
struct UserState {
  UserId me;
  ProtocolConfig config;
  std::set<UserId> group;

  std::optional<crypto::SigSecretKey> own_ssk;
  std::optional<crypto::SigPublicKey> own_spk;
  std::optional<crypto::ChainKey> own_chain; // send chain (per-sender modes)
  std::uint64_t own_sig_gen = 0;

  std::optional<crypto::ChainKey> shared_chain; // single-chain mode only

  std::map<UserId, PeerEntry> peer_keys;
  std::map<std::pair<UserId, std::uint64_t>, crypto::MessageKey> skipped;
  std::map<std::uint64_t, crypto::MessageKey> shared_skipped;
  std::map<UserId, std::uint64_t> recv_index; // next expected index per peer
  std::set<UserId> distributed_to;
  std::set<std::uint64_t> processed_controls;

  bool operator==(const UserState&) const = default;

  bool in_group() const { return !group.empty() && group.count(me) > 0; }

  /// The (spk, ck) pair as distributed to peers; absent until the member has
  /// sending capability.
  std::optional<SenderKey> own_sender_key() const;

  std::size_t skipped_count(const UserId& sender) const;
};

UserState init(const ProtocolConfig& config, const UserId& id);

struct CreateResult {
  ControlMsg control;
  std::vector<SenderKeyDistribution> distributions;
  UserState st;
};

/// Group creation: fresh sender key (shared chain seed in single-chain mode),
/// one distribution per other member, a roster announcement for the server.
Result<CreateResult> exec_create(const std::vector<UserId>& members,
                                 const UserState& st,
                                 crypto::Rng& rng);

struct SendResult {
  Frame frame;
  std::vector<SenderKeyDistribution> distributions;
  UserState st;
  /// Set when this send minted a fresh chain (first send after joining or
  /// after a removal wipe): the chain at index 0, before the ratchet step.
  std::optional<crypto::ChainKey> minted_chain;
};

/// Application send. Regenerates and redistributes the sender key first when
/// it is absent (first send after joining or after a removal refresh), and
/// tops up distributions for members added since the last send.
Result<SendResult> send(std::span<const std::uint8_t> message,
                        const UserState& st,
                        crypto::Rng& rng);

struct RecvResult {
  bytes plaintext;
  UserState st;
};

/// Total over adversarial frames. Distinct error per failure mode; the state
/// is unchanged on every error path.
Result<RecvResult> recv(const Frame& frame, const UserState& st);

struct ExecResult {
  ControlMsg control;
  UserState st;
};

Result<ExecResult> exec_add(const UserId& new_member, const UserState& st);

/// Removal: the remover applies the change (and the full key wipe) locally;
/// everyone else does so when processing the notification.
Result<ExecResult> exec_remove(const UserId& target, const UserState& st);

/// Processes a membership notification. A removal erases every sender key
/// (own and peers'), the skipped store and the distribution bookkeeping:
/// the group starts over. Duplicate seq is a no-op error.
Result<UserState> proc(const ControlMsg& control, const UserState& st);

/// Installs a peer's sender key received over a two-party channel and resets
/// the expected index to the one carried inside the distributed chain key.
Result<UserState> proc_distribution(const SenderKeyDistribution& d,
                                    const UserState& st);

/// Marks a control message as already applied. Used for the actor's own
/// notifications, which take effect at Exec time before the server assigns
/// the sequence number.
UserState mark_control_processed(UserState st, std::uint64_t seq);

} // namespace senderkeys::core
