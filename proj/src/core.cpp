#include "senderkeys/core.hpp"

#include <algorithm>

#include "senderkeys/encoding.hpp"
#include "senderkeys/variants.hpp"

namespace senderkeys::core {

namespace {

/// Wipes all key material: own sender key, every peer key, skipped stores
/// and distribution bookkeeping. Run on every removal — the group starts
/// over from fresh keys.
void wipe_keys(UserState& st)
{
  st.own_ssk.reset();
  st.own_spk.reset();
  st.own_chain.reset();
  st.own_sig_gen = 0;
  st.shared_chain.reset();
  st.peer_keys.clear();
  st.skipped.clear();
  st.shared_skipped.clear();
  st.recv_index.clear();
  st.distributed_to.clear();
}

std::uint64_t block_of(const ProtocolConfig& c)
{
  return c.sig_block == 0 ? 1 : c.sig_block;
}

crypto::Seed32 draw_seed(const UserState& st, crypto::Rng& rng)
{
  crypto::Seed32 rand = rng.draw32();
  if (st.config.hardened_rand()) {
    return variants::hardened_seed(rand, st);
  }
  return rand;
}

/// Installs a fresh own sender key: chain seeded from rng (the shared chain
/// in single-chain mode, and only if absent there), plus a signature pair.
/// Seeds are drawn against the pre-generation state so the hardened variant
/// mixes in secrets the caller of the rng cannot know.
void install_fresh_key(UserState& st, crypto::Rng& rng)
{
  const UserState before = st;
  if (st.config.single_chain()) {
    if (!st.shared_chain) {
      st.shared_chain = crypto::ChainKey{draw_seed(before, rng), 0};
    }
  } else {
    st.own_chain = crypto::ChainKey{draw_seed(before, rng), 0};
  }
  auto pair = crypto::sig_gen(draw_seed(before, rng));
  st.own_ssk = pair.secret_key;
  st.own_spk = pair.public_key;
  st.own_sig_gen = 0;
  st.distributed_to.clear();
}

/// The chain the member sends on.
crypto::ChainKey& send_chain(UserState& st)
{
  return st.config.single_chain() ? *st.shared_chain : *st.own_chain;
}

/// Distributions for every group member who has not yet received the current
/// sender key. The chain is captured before the ratchet step of the send in
/// progress, so recipients can decrypt from that very message onward.
std::vector<SenderKeyDistribution> top_up_distributions(UserState& st)
{
  std::vector<SenderKeyDistribution> out;
  const SenderKey key{*st.own_spk, send_chain(st)};
  for (const auto& m : st.group) {
    if (m == st.me || st.distributed_to.count(m) > 0) {
      continue;
    }
    out.push_back({st.me, m, key});
    st.distributed_to.insert(m);
  }
  return out;
}

std::vector<UserId> sorted(std::vector<UserId> ids)
{
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

struct ChainStep {
  crypto::MessageKey mk;
  crypto::ChainKey chain;
  std::vector<crypto::MessageKey> skipped; // keys for indices [chain.index, i)
};

/// Walks a receive chain to index i, collecting the message keys it skips.
/// Errors when i lies behind the chain (handled by the skipped store) or the
/// walk would overflow the skipped-key budget.
Result<ChainStep> step_chain_to(const crypto::ChainKey& chain,
                                std::uint64_t i,
                                std::size_t stored,
                                std::uint64_t n_max)
{
  if (i < chain.index) {
    return Error::skipped_key_missing;
  }
  const std::uint64_t gap = i - chain.index;
  if (gap > n_max || stored + gap > n_max) {
    return Error::skipped_capacity_exceeded;
  }
  ChainStep out;
  crypto::ChainKey cur = chain;
  out.skipped.reserve(gap);
  while (cur.index < i) {
    out.skipped.push_back(crypto::kdf_mk(cur));
    cur = crypto::kdf_ck(cur);
  }
  out.mk = crypto::kdf_mk(cur);
  out.chain = crypto::kdf_ck(cur);
  return out;
}

Result<UserState> apply_create(const ControlMsg& t, const UserState& st)
{
  if (!st.group.empty()) {
    return Error::group_exists;
  }
  if (std::find(t.subjects.begin(), t.subjects.end(), t.actor) ==
      t.subjects.end()) {
    return Error::actor_not_member;
  }
  if (std::find(t.subjects.begin(), t.subjects.end(), st.me) ==
      t.subjects.end()) {
    return Error::not_a_member;
  }
  UserState next = st;
  next.group = std::set<UserId>(t.subjects.begin(), t.subjects.end());
  return next;
}

Result<UserState> apply_add(const ControlMsg& t, const UserState& st)
{
  if (t.subjects.size() != 1) {
    return Error::bad_argument;
  }
  const UserId& target = t.subjects.front();
  if (st.in_group()) {
    if (st.group.count(t.actor) == 0) {
      return Error::actor_not_member;
    }
    if (st.group.count(target) > 0) {
      return Error::already_member;
    }
    UserState next = st;
    next.group.insert(target);
    return next;
  }
  if (st.me != target) {
    return Error::not_a_member;
  }
  if (!st.group.empty()) {
    return Error::group_exists;
  }
  // Joining: adopt the roster snapshot. Keys arrive lazily over the
  // two-party channels as existing members send.
  if (std::find(t.roster.begin(), t.roster.end(), st.me) == t.roster.end() ||
      std::find(t.roster.begin(), t.roster.end(), t.actor) == t.roster.end()) {
    return Error::bad_argument;
  }
  UserState next = st;
  next.group = std::set<UserId>(t.roster.begin(), t.roster.end());
  return next;
}

Result<UserState> apply_remove(const ControlMsg& t, const UserState& st)
{
  if (t.subjects.size() != 1) {
    return Error::bad_argument;
  }
  const UserId& target = t.subjects.front();
  if (!st.in_group()) {
    return Error::not_a_member;
  }
  if (st.group.count(t.actor) == 0) {
    return Error::actor_not_member;
  }
  if (st.group.count(target) == 0) {
    return Error::not_a_member;
  }
  UserState next = st;
  if (target == st.me) {
    next.group.clear();
    wipe_keys(next);
    return next;
  }
  next.group.erase(target);
  wipe_keys(next);
  return next;
}

Result<UserState> apply_update(const ControlMsg& t, const UserState& st)
{
  if (t.subjects.size() != 1 || t.subjects.front() != t.actor) {
    return Error::bad_argument;
  }
  if (!st.in_group()) {
    return Error::not_a_member;
  }
  if (st.group.count(t.actor) == 0) {
    return Error::actor_not_member;
  }
  // The refreshed key itself travels over the two-party channels; the
  // notification only orders the event on the log.
  return st;
}

} // namespace

std::string to_string(Variant v)
{
  switch (v) {
  case Variant::baseline:
    return "baseline";
  case Variant::sig_ratchet:
    return "sig-ratchet";
  case Variant::hardened_rand:
    return "hardened-rand";
  case Variant::single_chain:
    return "single-chain";
  case Variant::combined:
    return "combined";
  }
  return "unknown";
}

std::optional<Variant> variant_from_string(std::string_view s)
{
  if (s == "baseline") {
    return Variant::baseline;
  }
  if (s == "sig-ratchet" || s == "sig_ratchet") {
    return Variant::sig_ratchet;
  }
  if (s == "hardened-rand" || s == "hardened_rand" || s == "hardened") {
    return Variant::hardened_rand;
  }
  if (s == "single-chain" || s == "single_chain") {
    return Variant::single_chain;
  }
  if (s == "combined") {
    return Variant::combined;
  }
  return std::nullopt;
}

std::string to_string(ControlKind k)
{
  switch (k) {
  case ControlKind::create:
    return "create";
  case ControlKind::add:
    return "add";
  case ControlKind::remove:
    return "remove";
  case ControlKind::update:
    return "update";
  }
  return "unknown";
}

std::optional<SenderKey> UserState::own_sender_key() const
{
  if (!own_ssk || !own_spk) {
    return std::nullopt;
  }
  const auto& chain = config.single_chain() ? shared_chain : own_chain;
  if (!chain) {
    return std::nullopt;
  }
  return SenderKey{*own_spk, *chain};
}

std::size_t UserState::skipped_count(const UserId& sender) const
{
  if (config.single_chain()) {
    return shared_skipped.size();
  }
  std::size_t n = 0;
  for (const auto& [key, mk] : skipped) {
    (void)mk;
    if (key.first == sender) {
      ++n;
    }
  }
  return n;
}

UserState init(const ProtocolConfig& config, const UserId& id)
{
  UserState st;
  st.me = id;
  st.config = config;
  return st;
}

Result<CreateResult> exec_create(const std::vector<UserId>& members,
                                 const UserState& st,
                                 crypto::Rng& rng)
{
  if (!st.group.empty()) {
    return Error::group_exists;
  }
  const auto roster = sorted(members);
  if (roster.empty() ||
      std::find(roster.begin(), roster.end(), st.me) == roster.end()) {
    return Error::creator_not_in_members;
  }
  CreateResult out;
  out.st = st;
  out.st.group = std::set<UserId>(roster.begin(), roster.end());
  install_fresh_key(out.st, rng);
  out.distributions = top_up_distributions(out.st);
  out.control.kind = ControlKind::create;
  out.control.actor = st.me;
  out.control.subjects = roster;
  out.control.roster = roster;
  return out;
}

Result<SendResult> send(std::span<const std::uint8_t> message,
                        const UserState& st,
                        crypto::Rng& rng)
{
  if (!st.in_group()) {
    return Error::no_group;
  }
  SendResult out;
  out.st = st;
  if (!out.st.own_ssk ||
      (!out.st.config.single_chain() && !out.st.own_chain)) {
    const bool had_shared = st.shared_chain.has_value();
    install_fresh_key(out.st, rng);
    if (out.st.config.single_chain()) {
      if (!had_shared) {
        out.minted_chain = out.st.shared_chain;
      }
    } else {
      out.minted_chain = out.st.own_chain;
    }
  }
  out.distributions = top_up_distributions(out.st);

  crypto::ChainKey& chain = send_chain(out.st);
  const crypto::MessageKey mk = crypto::kdf_mk(chain);
  out.frame.ciphertext = crypto::enc(mk, message);
  out.frame.index = chain.index;
  out.frame.sender = st.me;
  chain = crypto::kdf_ck(chain);

  // Sig-ratchet: the frame closing a signature block carries the next
  // verification key inside the signed payload; the sender rotates to the
  // announced key right after signing.
  std::optional<crypto::SigKeyPair> next_pair;
  if (out.st.config.sig_ratchet() &&
      (out.frame.index + 1) % block_of(out.st.config) == 0) {
    next_pair = crypto::sig_gen(draw_seed(out.st, rng));
    out.frame.next_spk = next_pair->public_key;
  }
  out.frame.signature =
      crypto::sign(*out.st.own_ssk, encoding::signing_payload(out.frame));
  if (next_pair) {
    out.st.own_ssk = next_pair->secret_key;
    out.st.own_spk = next_pair->public_key;
    ++out.st.own_sig_gen;
  }
  return out;
}

Result<RecvResult> recv(const Frame& frame, const UserState& st)
{
  if (!st.in_group()) {
    return Error::no_group;
  }
  const auto it = st.peer_keys.find(frame.sender);
  if (it == st.peer_keys.end()) {
    return Error::pending_sender_key;
  }
  const PeerEntry& entry = it->second;

  // Authenticate before touching any chain state.
  const bytes payload = encoding::signing_payload(frame);
  bool current_gen = true;
  if (st.config.sig_ratchet()) {
    const std::uint64_t gen = frame.index / block_of(st.config);
    const crypto::SigPublicKey* vk = nullptr;
    if (gen == entry.sig_gen) {
      vk = &entry.spk;
    } else if (entry.prev_spk && gen + 1 == entry.sig_gen) {
      vk = &*entry.prev_spk;
      current_gen = false;
    } else {
      return Error::stale_spk;
    }
    if (!crypto::verify(*vk, frame.signature, payload)) {
      return Error::signature_invalid;
    }
  } else {
    if (!crypto::verify(entry.spk, frame.signature, payload)) {
      return Error::signature_invalid;
    }
  }

  UserState next = st;
  RecvResult out;
  const bool shared = st.config.single_chain();
  if (shared && !st.shared_chain) {
    return Error::pending_sender_key;
  }
  const crypto::ChainKey& chain =
      shared ? *st.shared_chain : entry.chain;

  if (frame.index < chain.index) {
    // A key set aside earlier, or a replay.
    const crypto::MessageKey* mk = nullptr;
    if (shared) {
      const auto sit = st.shared_skipped.find(frame.index);
      if (sit != st.shared_skipped.end()) {
        mk = &sit->second;
      }
    } else {
      const auto sit = next.skipped.find({frame.sender, frame.index});
      if (sit != next.skipped.end()) {
        mk = &sit->second;
      }
    }
    if (mk == nullptr) {
      return Error::skipped_key_missing;
    }
    auto pt = crypto::dec(*mk, frame.ciphertext);
    if (!pt.ok()) {
      return pt.error();
    }
    out.plaintext = pt.take();
    if (shared) {
      next.shared_skipped.erase(frame.index);
    } else {
      next.skipped.erase({frame.sender, frame.index});
    }
  } else {
    auto step = step_chain_to(chain, frame.index,
                              st.skipped_count(frame.sender),
                              st.config.n_max);
    if (!step.ok()) {
      return step.error();
    }
    auto pt = crypto::dec(step.value().mk, frame.ciphertext);
    if (!pt.ok()) {
      return pt.error();
    }
    out.plaintext = pt.take();
    auto& stepped = step.value();
    if (shared) {
      for (const auto& mk : stepped.skipped) {
        next.shared_skipped.emplace(mk.index, mk);
      }
      next.shared_chain = stepped.chain;
    } else {
      for (const auto& mk : stepped.skipped) {
        next.skipped.emplace(std::make_pair(frame.sender, mk.index), mk);
      }
      next.peer_keys[frame.sender].chain = stepped.chain;
      next.recv_index[frame.sender] = stepped.chain.index;
    }
  }

  // A fresh-generation announcement takes effect only after the frame
  // authenticated and decrypted.
  if (st.config.sig_ratchet() && frame.next_spk && current_gen) {
    PeerEntry& e = next.peer_keys[frame.sender];
    e.prev_spk = e.spk;
    e.spk = *frame.next_spk;
    ++e.sig_gen;
  }

  out.st = std::move(next);
  return out;
}

Result<ExecResult> exec_add(const UserId& new_member, const UserState& st)
{
  if (!st.in_group()) {
    return Error::no_group;
  }
  if (st.group.count(new_member) > 0) {
    return Error::already_member;
  }
  ExecResult out;
  out.st = st;
  out.st.group.insert(new_member);
  out.control.kind = ControlKind::add;
  out.control.actor = st.me;
  out.control.subjects = {new_member};
  out.control.roster.assign(out.st.group.begin(), out.st.group.end());
  return out;
}

Result<ExecResult> exec_remove(const UserId& target, const UserState& st)
{
  if (!st.in_group()) {
    return Error::no_group;
  }
  if (target == st.me) {
    return Error::self_remove;
  }
  if (st.group.count(target) == 0) {
    return Error::not_a_member;
  }
  ExecResult out;
  out.st = st;
  out.st.group.erase(target);
  wipe_keys(out.st);
  out.control.kind = ControlKind::remove;
  out.control.actor = st.me;
  out.control.subjects = {target};
  out.control.roster.assign(out.st.group.begin(), out.st.group.end());
  return out;
}

Result<UserState> proc(const ControlMsg& control, const UserState& st)
{
  if (st.processed_controls.count(control.seq) > 0) {
    return Error::duplicate_control;
  }
  Result<UserState> applied = [&]() -> Result<UserState> {
    switch (control.kind) {
    case ControlKind::create:
      return apply_create(control, st);
    case ControlKind::add:
      return apply_add(control, st);
    case ControlKind::remove:
      return apply_remove(control, st);
    case ControlKind::update:
      return apply_update(control, st);
    }
    return Error::unknown_control;
  }();
  if (!applied.ok()) {
    return applied.error();
  }
  UserState next = applied.take();
  next.processed_controls.insert(control.seq);
  return next;
}

Result<UserState> proc_distribution(const SenderKeyDistribution& d,
                                    const UserState& st)
{
  if (d.to != st.me) {
    return Error::wrong_recipient;
  }
  if (d.from == st.me) {
    return Error::bad_argument;
  }
  if (!st.in_group() || st.group.count(d.from) == 0) {
    return Error::not_a_member;
  }
  UserState next = st;
  PeerEntry entry;
  entry.spk = d.key.spk;
  if (st.config.single_chain()) {
    // The chain is group-owned: install it only when none is held yet.
    // An existing copy is never replaced — a lower-index copy derives a
    // superset of the distributed one, and a higher-index copy must not be
    // rewound once those keys have been erased.
    if (!next.shared_chain) {
      next.shared_chain = d.key.ck;
    }
  } else {
    entry.chain = d.key.ck;
  }
  entry.sig_gen = d.key.ck.index / block_of(st.config);

  // A re-keyed sender invalidates whatever was set aside under the old key.
  const auto old = st.peer_keys.find(d.from);
  if (old != st.peer_keys.end() && !(old->second == entry)) {
    std::erase_if(next.skipped, [&](const auto& kv) {
      return kv.first.first == d.from;
    });
  }
  next.peer_keys[d.from] = entry;
  next.recv_index[d.from] = d.key.ck.index;
  return next;
}

UserState mark_control_processed(UserState st, std::uint64_t seq)
{
  st.processed_controls.insert(seq);
  return st;
}

} // namespace senderkeys::core
