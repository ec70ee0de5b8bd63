#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "senderkeys/core.hpp"
#include "senderkeys/crypto.hpp"
#include "senderkeys/transport.hpp"

namespace senderkeys::game {

using core::UserId;

/// Chain owner id used for the group-owned chain in single-chain mode.
inline const UserId kSharedChain = "*shared*";

/// Which freshness discipline the judge applies to a transcript.
enum class Predicate {
  baseline,     // coarse: exposure locks out challenges until a full refresh
  strengthened, // additionally permits forgeries of messages that were
                // already sent (but withheld) before the exposure
  per_sender,   // scoped: only keys actually derivable from the exposed
                // state lock out challenges
};

std::string to_string(Predicate p);
std::optional<Predicate> predicate_from_string(std::string_view s);

enum class EventKind {
  init,
  create,
  send,
  challenge,
  receive,
  deliver,
  tp_deliver,
  add,
  remove,
  update,
  expose,
  expmk,
  refresh,
  forgery,
  rng_pin,
  rng_unpin,
  finalize,
};

std::string to_string(EventKind k);

/// What an exposed state could still derive, per chain generation: for every
/// chain copy the lowest reachable index, plus every stored skipped key.
struct ExposureSnapshot {
  struct Range {
    UserId owner;
    std::uint64_t generation = 0;
    std::uint64_t from_index = 0;
  };
  struct SkippedKey {
    UserId owner;
    std::uint64_t generation = 0;
    std::uint64_t index = 0;
  };
  std::vector<Range> ranges;
  std::vector<SkippedKey> skipped;
  bool held_ssk = false; // the exposed state carried a signing key

  bool covers(const UserId& owner, std::uint64_t gen,
              std::uint64_t index) const;
};

struct Event {
  std::uint64_t time = 0;
  EventKind kind = EventKind::init;
  UserId actor;    // who the oracle acted as / on
  UserId subject;  // challenge & expmk & forgery: chain owner or claimed sender
  std::uint64_t index = 0;
  std::uint64_t generation = 0;
  std::uint64_t seq = 0;
  bool ok = false;
  std::string detail;
  std::optional<ExposureSnapshot> exposure;
};

/// Removal bookkeeping: a refresh completes once every member of the
/// post-removal roster has processed the removal.
struct Removal {
  std::uint64_t seq = 0;
  std::uint64_t time = 0;
  std::vector<UserId> post_roster;
};

struct Transcript {
  std::vector<Event> events;
  std::vector<Removal> removals;

  std::string render() const;
};

struct Violation {
  std::uint64_t time = 0;
  std::string rule;
};

struct CleannessVerdict {
  bool clean = true;
  std::vector<Violation> violations;
};

/// Replays the freshness rules over a finished transcript:
///  - a challenge after an uncleared exposure is out of scope, and so is a
///    challenge for a key the exposed state could still derive;
///  - a key surrendered directly is never challengeable;
///  - an accepted forgery only counts when the claimed sender was not
///    exposed, or the receiver refreshed in between (the strengthened
///    predicate also admits indices the sender had already used).
CleannessVerdict judge_cleanness(const Transcript& t,
                                 Predicate p = Predicate::baseline);

enum class Outcome { win, lose, dirty };
std::string to_string(Outcome o);

/// Adversary-visible result of an oracle, uniform over success and failure.
struct OracleOutcome {
  bool ok = false;
  std::string detail;
  std::optional<bytes> plaintext;
};

/// The indistinguishability-and-forgery experiment. One hidden bit, a group
/// of simulated members, the delivery service and the two-party channels,
/// plus a transcript every oracle call appends to. Fully deterministic for a
/// fixed seed and call sequence.
class Game {
public:
  Game(std::uint64_t seed, core::ProtocolConfig cfg);

  void add_user(const UserId& id);
  bool has_user(const UserId& id) const;
  const core::UserState& state(const UserId& id) const;

  /// Encrypts m0 or m1 under the hidden bit. The frame is logged and the
  /// transcript records sender, chain index and chain generation.
  Result<core::Frame> o_challenge(const UserId& id, const bytes& m0,
                                  const bytes& m1);

  /// Honest application send; plaintext is adversary-chosen.
  Result<core::Frame> o_send(const UserId& id, const bytes& m);

  /// Hands an arbitrary frame to a user, claiming it comes from
  /// claimed_sender. Accepting a frame that no honest oracle produced is a
  /// forgery.
  OracleOutcome o_receive(const UserId& id, const UserId& claimed_sender,
                          core::Frame frame);

  Result<core::ControlMsg> o_create(const UserId& id,
                                    const std::vector<UserId>& members);
  Result<core::ControlMsg> o_add(const UserId& id, const UserId& target);
  Result<core::ControlMsg> o_remove(const UserId& id, const UserId& target);
  Result<core::ControlMsg> o_update(const UserId& id);

  /// Delivers log entry seq to a user and lets the user process it. The
  /// plaintext of an honest frame is revealed to the adversary unless the
  /// frame was a challenge.
  OracleOutcome o_deliver(const UserId& id, std::uint64_t seq,
                          bool redeliver = false);

  OracleOutcome tp_deliver(const UserId& from, const UserId& to);
  OracleOutcome tp_deliver_next(const UserId& to);
  std::size_t tp_pending(const UserId& to) const;

  /// Full state serialization, secrets included.
  Result<bytes> o_expose(const UserId& id);

  /// Surrenders one message key of the user's current chain, taken from any
  /// honest copy (the sender's own chain, a peer copy, or a skipped store).
  Result<crypto::MessageKey> o_expmk(const UserId& id, std::uint64_t index);

  /// Pins a user's randomness to a fixed byte pattern / restores the seeded
  /// stream. Pinning is observable in the transcript, not a secret exposure.
  void rng_pin(const UserId& id, const bytes& pattern);
  void rng_unpin(const UserId& id);

  Outcome finalize(int guess, Predicate p = Predicate::baseline);

  const Transcript& transcript() const { return transcript_; }
  transport::Server& server() { return server_; }
  transport::TwoPartyChannels& channels() { return channels_; }
  const core::ProtocolConfig& config() const { return cfg_; }
  bool forgery_accepted() const { return forgery_accepted_; }
  int hidden_bit() const { return bit_; } // for harness assertions only
  std::uint64_t now() const { return clock_; }

  /// Chain generation bookkeeping (also used by the scenario reporter).
  std::uint64_t current_generation(const UserId& owner) const;

private:
  struct User {
    core::UserState st;
    std::unique_ptr<crypto::SeededRng> seeded;
    std::unique_ptr<crypto::PinnedRng> pinned;
    crypto::Rng& rng();
  };

  Event& log_event(EventKind kind);
  void note_generation(const UserId& id, const core::UserState& before,
                       const core::UserState& after);
  void record_refresh(const UserId& id, std::uint64_t seq);
  std::optional<std::uint64_t>
  generation_of_chain(const UserId& owner, const crypto::ChainKey& copy) const;
  std::optional<std::uint64_t>
  generation_of_skipped(const UserId& owner, std::uint64_t index,
                        const crypto::MessageKey& mk) const;
  ExposureSnapshot snapshot_exposure(const core::UserState& st) const;
  void submit_control(core::ControlMsg& control, User& user,
                      const std::vector<core::SenderKeyDistribution>& dists);
  OracleOutcome process_payload(const UserId& id,
                                const transport::Payload& payload,
                                std::uint64_t seq);
  bool is_honest(const core::Frame& f) const;

  std::uint64_t seed_;
  core::ProtocolConfig cfg_;
  int bit_;
  std::uint64_t clock_ = 0;
  std::map<UserId, User> users_;
  transport::Server server_;
  transport::TwoPartyChannels channels_;
  Transcript transcript_;
  std::set<bytes> honest_frames_;
  std::set<bytes> challenge_frames_;
  bool forgery_accepted_ = false;
  std::optional<Outcome> outcome_;
  // Generation-zero chain copies per owner, appended at each regeneration.
  std::map<UserId, std::vector<crypto::ChainKey>> gen_initial_;
};

/// Scripted active attack: capture a withheld message's frame, expose the
/// sender's signing key, surrender the message key, then deliver a
/// re-encrypted and re-signed frame under the same index and identity.
struct AttackReport {
  bool accepted = false;        // did the victim accept the forged frame
  std::string detail;           // deterministic step-by-step log
  std::optional<bytes> plaintext; // what the victim decrypted, if accepted
};

AttackReport attack_q1_q4(Game& g, const UserId& id1, const UserId& id2);

/// Variant of the same attack that alters only metadata: the honest
/// ciphertext is re-signed as-is (a distinct signature over the same
/// payload), plus an index-shifted probe that must die at decryption.
AttackReport attack_metadata(Game& g, const UserId& id1, const UserId& id2);

} // namespace senderkeys::game
