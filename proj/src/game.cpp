#include "senderkeys/game.hpp"

#include <algorithm>
#include <sstream>

#include "senderkeys/encoding.hpp"
#include "senderkeys/variants.hpp"

namespace senderkeys::game {

namespace {

constexpr std::uint64_t kMaxChainWalk = 1u << 20;

std::uint64_t derive_u64(std::uint64_t seed, std::string_view label,
                         std::string_view id)
{
  bytes input;
  append_u64_be(input, seed);
  input.insert(input.end(), label.begin(), label.end());
  input.insert(input.end(), id.begin(), id.end());
  const auto digest = crypto::sha256(input);
  return read_u64_be(std::span<const std::uint8_t>(digest.data(), 8), 0);
}

std::string short_digest(std::span<const std::uint8_t> data)
{
  const auto digest = crypto::sha256(data);
  return to_hex(std::span<const std::uint8_t>(digest.data(), 4));
}

std::string join(const std::vector<UserId>& ids)
{
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) {
      out += ",";
    }
    out += id;
  }
  return out;
}

/// Steps a chain copy forward to the given index and derives that message
/// key. Empty when the index lies behind the copy or too far ahead.
std::optional<crypto::MessageKey> derive_at(const crypto::ChainKey& copy,
                                            std::uint64_t index)
{
  if (index < copy.index || index - copy.index > kMaxChainWalk) {
    return std::nullopt;
  }
  crypto::ChainKey cur = copy;
  while (cur.index < index) {
    cur = crypto::kdf_ck(cur);
  }
  return crypto::kdf_mk(cur);
}

} // namespace

std::string to_string(Predicate p)
{
  switch (p) {
  case Predicate::baseline:
    return "baseline";
  case Predicate::strengthened:
    return "strengthened";
  case Predicate::per_sender:
    return "per-sender";
  }
  return "unknown";
}

std::optional<Predicate> predicate_from_string(std::string_view s)
{
  if (s == "baseline") {
    return Predicate::baseline;
  }
  if (s == "strengthened") {
    return Predicate::strengthened;
  }
  if (s == "per-sender" || s == "per_sender") {
    return Predicate::per_sender;
  }
  return std::nullopt;
}

std::string to_string(EventKind k)
{
  switch (k) {
  case EventKind::init:
    return "init";
  case EventKind::create:
    return "create";
  case EventKind::send:
    return "send";
  case EventKind::challenge:
    return "challenge";
  case EventKind::receive:
    return "receive";
  case EventKind::deliver:
    return "deliver";
  case EventKind::tp_deliver:
    return "tp_deliver";
  case EventKind::add:
    return "add";
  case EventKind::remove:
    return "remove";
  case EventKind::update:
    return "update";
  case EventKind::expose:
    return "expose";
  case EventKind::expmk:
    return "expmk";
  case EventKind::refresh:
    return "refresh";
  case EventKind::forgery:
    return "forgery";
  case EventKind::rng_pin:
    return "rng_pin";
  case EventKind::rng_unpin:
    return "rng_unpin";
  case EventKind::finalize:
    return "finalize";
  }
  return "unknown";
}

std::string to_string(Outcome o)
{
  switch (o) {
  case Outcome::win:
    return "win";
  case Outcome::lose:
    return "lose";
  case Outcome::dirty:
    return "dirty";
  }
  return "unknown";
}

bool ExposureSnapshot::covers(const UserId& owner, std::uint64_t gen,
                              std::uint64_t index) const
{
  for (const auto& r : ranges) {
    if (r.owner == owner && r.generation == gen && r.from_index <= index) {
      return true;
    }
  }
  for (const auto& s : skipped) {
    if (s.owner == owner && s.generation == gen && s.index == index) {
      return true;
    }
  }
  return false;
}

std::string Transcript::render() const
{
  std::ostringstream os;
  for (const auto& e : events) {
    os << "[" << e.time << "] " << to_string(e.kind);
    if (!e.actor.empty()) {
      os << " actor=" << e.actor;
    }
    if (!e.subject.empty()) {
      os << " subject=" << e.subject;
    }
    if (e.kind == EventKind::challenge || e.kind == EventKind::expmk ||
        e.kind == EventKind::forgery || e.kind == EventKind::send) {
      os << " gen=" << e.generation << " index=" << e.index;
    }
    if (e.kind == EventKind::refresh || e.kind == EventKind::deliver) {
      os << " seq=" << e.seq;
    }
    os << (e.ok ? " ok" : " err");
    if (!e.detail.empty()) {
      os << " " << e.detail;
    }
    if (e.exposure) {
      os << " ranges=" << e.exposure->ranges.size()
         << " skipped=" << e.exposure->skipped.size()
         << (e.exposure->held_ssk ? " ssk" : "");
    }
    os << "\n";
  }
  for (const auto& r : removals) {
    os << "removal seq=" << r.seq << " time=" << r.time
       << " roster=" << join(r.post_roster) << "\n";
  }
  return os.str();
}

CleannessVerdict judge_cleanness(const Transcript& t, Predicate p)
{
  CleannessVerdict verdict;
  const auto& evs = t.events;

  const auto exposure_locks = [](const Event& e) {
    return e.exposure &&
           (!e.exposure->ranges.empty() || !e.exposure->skipped.empty() ||
            e.exposure->held_ssk);
  };

  // True when a full refresh — a removal whose whole post-roster processed
  // it — completes strictly between the exposure and the given time.
  const auto cleared = [&](const Event& exposure, std::uint64_t at) {
    for (const auto& r : t.removals) {
      if (r.post_roster.empty()) {
        continue;
      }
      bool all = true;
      for (const auto& m : r.post_roster) {
        bool found = false;
        for (const auto& e : evs) {
          if (e.kind == EventKind::refresh && e.actor == m &&
              e.seq == r.seq && e.time > exposure.time && e.time < at) {
            found = true;
            break;
          }
        }
        if (!found) {
          all = false;
          break;
        }
      }
      if (all) {
        return true;
      }
    }
    return false;
  };

  for (const auto& ch : evs) {
    if (ch.kind != EventKind::challenge || !ch.ok) {
      continue;
    }
    // A key surrendered outright is never a valid challenge, whenever the
    // surrender happens.
    for (const auto& e : evs) {
      if (e.kind == EventKind::expmk && e.ok && e.subject == ch.subject &&
          e.generation == ch.generation && e.index == ch.index) {
        verdict.violations.push_back({ch.time, "challenged-key-surrendered"});
        break;
      }
    }
    if (p != Predicate::per_sender) {
      // Coarse freshness: any uncleared earlier exposure poisons every
      // later challenge until the group refreshes.
      for (const auto& e : evs) {
        if (e.kind == EventKind::expose && e.ok && exposure_locks(e) &&
            e.time < ch.time && !cleared(e, ch.time)) {
          verdict.violations.push_back({ch.time, "challenge-after-exposure"});
          break;
        }
      }
    }
    // Derivability: the challenged key was still computable from some
    // exposed state (a lingering chain position or a stored skipped key).
    // Under the scoped predicate this is the whole rule; otherwise it adds
    // the later-exposure case the coarse rule cannot see.
    for (const auto& e : evs) {
      if (e.kind != EventKind::expose || !e.ok || !e.exposure) {
        continue;
      }
      if (p != Predicate::per_sender && e.time < ch.time) {
        continue;
      }
      if (e.exposure->covers(ch.subject, ch.generation, ch.index)) {
        verdict.violations.push_back(
            {ch.time, "challenged-key-derivable-from-exposure"});
        break;
      }
    }
  }

  for (const auto& f : evs) {
    if (f.kind != EventKind::forgery || !f.ok) {
      continue;
    }
    for (const auto& e : evs) {
      if (e.kind != EventKind::expose || !e.ok || e.actor != f.subject ||
          e.time >= f.time || !e.exposure || !e.exposure->held_ssk) {
        continue;
      }
      // The receiver healing: it processed a removal after the exposure.
      bool refreshed = false;
      for (const auto& r : evs) {
        if (r.kind == EventKind::refresh && r.actor == f.actor &&
            r.time > e.time && r.time < f.time) {
          refreshed = true;
          break;
        }
      }
      if (refreshed) {
        continue;
      }
      if (p == Predicate::strengthened) {
        // Indices the sender had already used before the exposure carry
        // honest (withheld) content; forging those is an admissible win.
        bool already_sent = false;
        for (const auto& r : e.exposure->ranges) {
          if (r.owner == f.subject && r.from_index > f.index) {
            already_sent = true;
            break;
          }
        }
        if (already_sent) {
          continue;
        }
      }
      verdict.violations.push_back({f.time, "forged-sender-exposed"});
      break;
    }
  }

  std::sort(verdict.violations.begin(), verdict.violations.end(),
            [](const Violation& a, const Violation& b) {
              return a.time < b.time || (a.time == b.time && a.rule < b.rule);
            });
  verdict.clean = verdict.violations.empty();
  return verdict;
}

crypto::Rng& Game::User::rng()
{
  if (pinned) {
    return *pinned;
  }
  return *seeded;
}

Game::Game(std::uint64_t seed, core::ProtocolConfig cfg)
    : seed_(seed), cfg_(cfg),
      bit_(static_cast<int>(derive_u64(seed, "bit", "") & 1)),
      server_(transport::DeliveryMode::adversarial, cfg.single_chain())
{
}

void Game::add_user(const UserId& id)
{
  if (users_.count(id) > 0) {
    return;
  }
  User u;
  u.st = core::init(cfg_, id);
  u.seeded = std::make_unique<crypto::SeededRng>(derive_u64(seed_, "rng", id));
  users_.emplace(id, std::move(u));
  Event& e = log_event(EventKind::init);
  e.actor = id;
  e.ok = true;
}

bool Game::has_user(const UserId& id) const { return users_.count(id) > 0; }

const core::UserState& Game::state(const UserId& id) const
{
  return users_.at(id).st;
}

Event& Game::log_event(EventKind kind)
{
  Event e;
  e.time = clock_++;
  e.kind = kind;
  transcript_.events.push_back(std::move(e));
  return transcript_.events.back();
}

void Game::note_generation(const UserId& id, const core::UserState& before,
                           const core::UserState& after)
{
  if (cfg_.single_chain()) {
    return; // shared-chain generations are noted at mint sites
  }
  // A fresh own chain (first key, post-removal regeneration, proactive
  // update) starts a new generation for this sender.
  if (!after.own_chain) {
    return;
  }
  const bool fresh =
      !before.own_chain ||
      (after.own_chain->index == 0 &&
       before.own_chain->secret != after.own_chain->secret);
  if (fresh && after.own_chain->index == 0) {
    gen_initial_[id].push_back(*after.own_chain);
  }
}

void Game::record_refresh(const UserId& id, std::uint64_t seq)
{
  Event& e = log_event(EventKind::refresh);
  e.actor = id;
  e.seq = seq;
  e.ok = true;
}

std::uint64_t Game::current_generation(const UserId& owner) const
{
  const auto it = gen_initial_.find(owner);
  if (it == gen_initial_.end() || it->second.empty()) {
    return 0;
  }
  return it->second.size() - 1;
}

std::optional<std::uint64_t>
Game::generation_of_chain(const UserId& owner,
                          const crypto::ChainKey& copy) const
{
  const auto it = gen_initial_.find(owner);
  if (it == gen_initial_.end()) {
    return std::nullopt;
  }
  for (std::size_t g = it->second.size(); g-- > 0;) {
    const crypto::ChainKey& init = it->second[g];
    if (copy.index < init.index ||
        copy.index - init.index > kMaxChainWalk) {
      continue;
    }
    crypto::ChainKey cur = init;
    while (cur.index < copy.index) {
      cur = crypto::kdf_ck(cur);
    }
    if (cur.secret == copy.secret) {
      return g;
    }
  }
  return std::nullopt;
}

std::optional<std::uint64_t>
Game::generation_of_skipped(const UserId& owner, std::uint64_t index,
                            const crypto::MessageKey& mk) const
{
  const auto it = gen_initial_.find(owner);
  if (it == gen_initial_.end()) {
    return std::nullopt;
  }
  for (std::size_t g = it->second.size(); g-- > 0;) {
    const auto derived = derive_at(it->second[g], index);
    if (derived && derived->secret == mk.secret) {
      return g;
    }
  }
  return std::nullopt;
}

ExposureSnapshot Game::snapshot_exposure(const core::UserState& st) const
{
  ExposureSnapshot snap;
  snap.held_ssk = st.own_ssk.has_value();
  const auto add_range = [&](const UserId& owner,
                             const crypto::ChainKey& copy) {
    const auto gen = generation_of_chain(owner, copy);
    snap.ranges.push_back(
        {owner, gen.value_or(current_generation(owner)), copy.index});
  };
  if (st.own_chain) {
    add_range(st.me, *st.own_chain);
  }
  if (st.shared_chain) {
    add_range(kSharedChain, *st.shared_chain);
  }
  for (const auto& [id, entry] : st.peer_keys) {
    if (!st.config.single_chain()) {
      add_range(id, entry.chain);
    }
  }
  for (const auto& [key, mk] : st.skipped) {
    const auto gen = generation_of_skipped(key.first, key.second, mk);
    snap.skipped.push_back(
        {key.first, gen.value_or(current_generation(key.first)), key.second});
  }
  for (const auto& [idx, mk] : st.shared_skipped) {
    const auto gen = generation_of_skipped(kSharedChain, idx, mk);
    snap.skipped.push_back(
        {kSharedChain, gen.value_or(current_generation(kSharedChain)), idx});
  }
  return snap;
}

bool Game::is_honest(const core::Frame& f) const
{
  return honest_frames_.count(encoding::encode_frame(f)) > 0;
}

Result<core::Frame> Game::o_challenge(const UserId& id, const bytes& m0,
                                      const bytes& m1)
{
  Event& e = log_event(EventKind::challenge);
  e.actor = id;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  if (m0.size() != m1.size()) {
    e.detail = to_string(Error::length_mismatch);
    return Error::length_mismatch;
  }
  User& u = users_.at(id);
  const bytes& m = bit_ == 0 ? m0 : m1;
  auto res = core::send(m, u.st, u.rng());
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return res.error();
  }
  auto& sr = res.value();
  auto seq = server_.submit(sr.frame);
  if (!seq.ok()) {
    e.detail = to_string(seq.error());
    return seq.error();
  }
  const core::UserState before = u.st;
  u.st = sr.st;
  if (sr.minted_chain) {
    if (cfg_.single_chain()) {
      gen_initial_[kSharedChain].push_back(*sr.minted_chain);
    } else {
      gen_initial_[id].push_back(*sr.minted_chain);
    }
  }
  note_generation(id, before, u.st);
  for (const auto& d : sr.distributions) {
    channels_.send(d);
  }
  const UserId owner = cfg_.single_chain() ? kSharedChain : id;
  e.subject = owner;
  e.index = sr.frame.index;
  e.generation = current_generation(owner);
  e.seq = seq.value();
  e.ok = true;
  e.detail = "mlen=" + std::to_string(m.size()) +
             " dists=" + std::to_string(sr.distributions.size());
  honest_frames_.insert(encoding::encode_frame(sr.frame));
  challenge_frames_.insert(encoding::encode_frame(sr.frame));
  return sr.frame;
}

Result<core::Frame> Game::o_send(const UserId& id, const bytes& m)
{
  Event& e = log_event(EventKind::send);
  e.actor = id;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  User& u = users_.at(id);
  auto res = core::send(m, u.st, u.rng());
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return res.error();
  }
  auto& sr = res.value();
  auto seq = server_.submit(sr.frame);
  if (!seq.ok()) {
    // Single-chain index conflict: nothing is committed, the client retries
    // after catching up.
    e.index = sr.frame.index;
    e.detail = to_string(seq.error());
    return seq.error();
  }
  const core::UserState before = u.st;
  u.st = sr.st;
  if (sr.minted_chain) {
    if (cfg_.single_chain()) {
      gen_initial_[kSharedChain].push_back(*sr.minted_chain);
    } else {
      gen_initial_[id].push_back(*sr.minted_chain);
    }
  }
  note_generation(id, before, u.st);
  for (const auto& d : sr.distributions) {
    channels_.send(d);
  }
  const UserId owner = cfg_.single_chain() ? kSharedChain : id;
  e.subject = owner;
  e.index = sr.frame.index;
  e.generation = current_generation(owner);
  e.seq = seq.value();
  e.ok = true;
  e.detail = "mlen=" + std::to_string(m.size()) +
             " dists=" + std::to_string(sr.distributions.size());
  honest_frames_.insert(encoding::encode_frame(sr.frame));
  return sr.frame;
}

OracleOutcome Game::o_receive(const UserId& id, const UserId& claimed_sender,
                              core::Frame frame)
{
  frame.sender = claimed_sender;
  Event& e = log_event(EventKind::receive);
  e.actor = id;
  e.subject = claimed_sender;
  e.index = frame.index;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return {false, e.detail, std::nullopt};
  }
  User& u = users_.at(id);
  auto res = core::recv(frame, u.st);
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return {false, e.detail, std::nullopt};
  }
  u.st = res.value().st;
  e.ok = true;
  const bool honest = is_honest(frame);
  const bool challenge =
      challenge_frames_.count(encoding::encode_frame(frame)) > 0;
  e.detail = honest ? "honest" : "forged";
  if (!honest) {
    forgery_accepted_ = true;
    Event& f = log_event(EventKind::forgery);
    f.actor = id;
    f.subject = claimed_sender;
    f.index = frame.index;
    f.generation = current_generation(
        cfg_.single_chain() ? kSharedChain : claimed_sender);
    f.ok = true;
    f.detail = "ctlen=" + std::to_string(frame.ciphertext.size());
  }
  OracleOutcome out;
  out.ok = true;
  out.detail = e.detail;
  if (!challenge) {
    out.plaintext = res.value().plaintext;
  }
  return out;
}

void Game::submit_control(core::ControlMsg& control, User& user,
                          const std::vector<core::SenderKeyDistribution>& dists)
{
  for (const auto& d : dists) {
    channels_.send(d);
  }
  auto seq = server_.submit(control);
  control.seq = seq.value(); // controls are never refused
  user.st = core::mark_control_processed(user.st, control.seq);
}

Result<core::ControlMsg> Game::o_create(const UserId& id,
                                        const std::vector<UserId>& members)
{
  Event& e = log_event(EventKind::create);
  e.actor = id;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  for (const auto& m : members) {
    if (users_.count(m) == 0) {
      e.detail = to_string(Error::unknown_user);
      return Error::unknown_user;
    }
  }
  User& u = users_.at(id);
  auto res = core::exec_create(members, u.st, u.rng());
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return res.error();
  }
  auto& cr = res.value();
  const core::UserState before = u.st;
  u.st = cr.st;
  if (cfg_.single_chain() && u.st.shared_chain) {
    gen_initial_[kSharedChain].push_back(*u.st.shared_chain);
  }
  note_generation(id, before, u.st);
  submit_control(cr.control, u, cr.distributions);
  e.seq = cr.control.seq;
  e.ok = true;
  e.detail = "roster=" + join(cr.control.roster) +
             " dists=" + std::to_string(cr.distributions.size());
  return cr.control;
}

Result<core::ControlMsg> Game::o_add(const UserId& id, const UserId& target)
{
  Event& e = log_event(EventKind::add);
  e.actor = id;
  e.subject = target;
  if (users_.count(id) == 0 || users_.count(target) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  User& u = users_.at(id);
  auto res = core::exec_add(target, u.st);
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return res.error();
  }
  u.st = res.value().st;
  core::ControlMsg control = res.value().control;
  submit_control(control, u, {});
  e.seq = control.seq;
  e.ok = true;
  return control;
}

Result<core::ControlMsg> Game::o_remove(const UserId& id,
                                        const UserId& target)
{
  Event& e = log_event(EventKind::remove);
  e.actor = id;
  e.subject = target;
  if (users_.count(id) == 0 || users_.count(target) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  User& u = users_.at(id);
  auto res = core::exec_remove(target, u.st);
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return res.error();
  }
  u.st = res.value().st;
  core::ControlMsg control = res.value().control;
  submit_control(control, u, {});
  e.seq = control.seq;
  e.ok = true;
  e.detail = "roster=" + join(control.roster);
  transcript_.removals.push_back({control.seq, e.time, control.roster});
  // The remover applies the wipe at execution time; that is its refresh.
  record_refresh(id, control.seq);
  return control;
}

Result<core::ControlMsg> Game::o_update(const UserId& id)
{
  Event& e = log_event(EventKind::update);
  e.actor = id;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  User& u = users_.at(id);
  auto res = variants::exec_update(u.st, u.rng());
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return res.error();
  }
  const core::UserState before = u.st;
  u.st = res.value().st;
  note_generation(id, before, u.st);
  core::ControlMsg control = res.value().control;
  submit_control(control, u, res.value().distributions);
  e.seq = control.seq;
  e.ok = true;
  e.detail = "dists=" + std::to_string(res.value().distributions.size());
  return control;
}

OracleOutcome Game::process_payload(const UserId& id,
                                    const transport::Payload& payload,
                                    std::uint64_t seq)
{
  Event& e = log_event(EventKind::deliver);
  e.actor = id;
  e.seq = seq;
  User& u = users_.at(id);
  if (const auto* f = std::get_if<core::Frame>(&payload)) {
    e.subject = f->sender;
    e.index = f->index;
    auto res = core::recv(*f, u.st);
    if (!res.ok()) {
      e.detail = to_string(res.error());
      return {false, e.detail, std::nullopt};
    }
    u.st = res.value().st;
    e.ok = true;
    const bool challenge =
        challenge_frames_.count(encoding::encode_frame(*f)) > 0;
    e.detail = challenge ? "challenge-frame" : "frame";
    if (!is_honest(*f)) {
      forgery_accepted_ = true;
      Event& fe = log_event(EventKind::forgery);
      fe.actor = id;
      fe.subject = f->sender;
      fe.index = f->index;
      fe.generation = current_generation(
          cfg_.single_chain() ? kSharedChain : f->sender);
      fe.ok = true;
    }
    OracleOutcome out;
    out.ok = true;
    out.detail = e.detail;
    if (!challenge) {
      out.plaintext = res.value().plaintext;
    }
    return out;
  }
  const auto& control = std::get<core::ControlMsg>(payload);
  e.subject = control.actor;
  auto res = core::proc(control, u.st);
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return {false, e.detail, std::nullopt};
  }
  u.st = res.take();
  e.ok = true;
  e.detail = core::to_string(control.kind);
  if (control.kind == core::ControlKind::remove) {
    record_refresh(id, control.seq);
  }
  return {true, e.detail, std::nullopt};
}

OracleOutcome Game::o_deliver(const UserId& id, std::uint64_t seq,
                              bool redeliver)
{
  if (users_.count(id) == 0) {
    Event& e = log_event(EventKind::deliver);
    e.actor = id;
    e.seq = seq;
    e.detail = to_string(Error::unknown_user);
    return {false, e.detail, std::nullopt};
  }
  auto payload = server_.deliver(id, seq, redeliver);
  if (!payload.ok()) {
    Event& e = log_event(EventKind::deliver);
    e.actor = id;
    e.seq = seq;
    e.detail = to_string(payload.error());
    return {false, e.detail, std::nullopt};
  }
  return process_payload(id, payload.value(), seq);
}

OracleOutcome Game::tp_deliver(const UserId& from, const UserId& to)
{
  Event& e = log_event(EventKind::tp_deliver);
  e.actor = to;
  e.subject = from;
  if (users_.count(to) == 0) {
    e.detail = to_string(Error::unknown_user);
    return {false, e.detail, std::nullopt};
  }
  auto d = channels_.deliver(from, to);
  if (!d.ok()) {
    e.detail = to_string(d.error());
    return {false, e.detail, std::nullopt};
  }
  User& u = users_.at(to);
  auto res = core::proc_distribution(d.value(), u.st);
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return {false, e.detail, std::nullopt};
  }
  u.st = res.take();
  e.ok = true;
  e.detail = "index=" + std::to_string(d.value().key.ck.index);
  return {true, e.detail, std::nullopt};
}

OracleOutcome Game::tp_deliver_next(const UserId& to)
{
  Event& e = log_event(EventKind::tp_deliver);
  e.actor = to;
  if (users_.count(to) == 0) {
    e.detail = to_string(Error::unknown_user);
    return {false, e.detail, std::nullopt};
  }
  auto d = channels_.deliver_next(to);
  if (!d.ok()) {
    e.detail = to_string(d.error());
    return {false, e.detail, std::nullopt};
  }
  e.subject = d.value().from;
  User& u = users_.at(to);
  auto res = core::proc_distribution(d.value(), u.st);
  if (!res.ok()) {
    e.detail = to_string(res.error());
    return {false, e.detail, std::nullopt};
  }
  u.st = res.take();
  e.ok = true;
  e.detail = "index=" + std::to_string(d.value().key.ck.index);
  return {true, e.detail, std::nullopt};
}

std::size_t Game::tp_pending(const UserId& to) const
{
  return channels_.pending_for(to);
}

Result<bytes> Game::o_expose(const UserId& id)
{
  Event& e = log_event(EventKind::expose);
  e.actor = id;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  const core::UserState& st = users_.at(id).st;
  bytes out = encoding::serialize_state(st);
  e.exposure = snapshot_exposure(st);
  e.ok = true;
  e.detail = "digest=" + short_digest(out);
  return out;
}

Result<crypto::MessageKey> Game::o_expmk(const UserId& id,
                                         std::uint64_t index)
{
  Event& e = log_event(EventKind::expmk);
  e.actor = id;
  e.index = index;
  if (users_.count(id) == 0) {
    e.detail = to_string(Error::unknown_user);
    return Error::unknown_user;
  }
  const UserId owner = cfg_.single_chain() ? kSharedChain : id;
  e.subject = owner;
  const auto git = gen_initial_.find(owner);
  if (git == gen_initial_.end() || git->second.empty()) {
    e.detail = to_string(Error::key_unavailable);
    return Error::key_unavailable;
  }
  const std::uint64_t gen = git->second.size() - 1;
  e.generation = gen;

  // The key is surrendered only while some honest state can still produce
  // it: a current-generation chain copy not yet past the index, or a stored
  // skipped key.
  std::optional<crypto::MessageKey> found;
  const auto try_chain = [&](const crypto::ChainKey& copy) {
    if (found || generation_of_chain(owner, copy) != gen) {
      return;
    }
    if (auto mk = derive_at(copy, index)) {
      found = mk;
    }
  };
  for (const auto& [uid, user] : users_) {
    const core::UserState& st = user.st;
    if (cfg_.single_chain()) {
      if (st.shared_chain) {
        try_chain(*st.shared_chain);
      }
      const auto sit = st.shared_skipped.find(index);
      if (!found && sit != st.shared_skipped.end() &&
          generation_of_skipped(owner, index, sit->second) == gen) {
        found = sit->second;
      }
    } else {
      if (uid == id && st.own_chain) {
        try_chain(*st.own_chain);
      }
      const auto pit = st.peer_keys.find(id);
      if (pit != st.peer_keys.end()) {
        try_chain(pit->second.chain);
      }
      const auto sit = st.skipped.find({id, index});
      if (!found && sit != st.skipped.end() &&
          generation_of_skipped(owner, index, sit->second) == gen) {
        found = sit->second;
      }
    }
    if (found) {
      break;
    }
  }
  if (!found) {
    e.detail = to_string(Error::key_unavailable);
    return Error::key_unavailable;
  }
  e.ok = true;
  return *found;
}

void Game::rng_pin(const UserId& id, const bytes& pattern)
{
  Event& e = log_event(EventKind::rng_pin);
  e.actor = id;
  if (users_.count(id) == 0 || pattern.empty()) {
    e.detail = "ignored";
    return;
  }
  users_.at(id).pinned = std::make_unique<crypto::PinnedRng>(pattern);
  e.ok = true;
  e.detail = "pattern=" + to_hex(std::span<const std::uint8_t>(
                              pattern.data(),
                              std::min<std::size_t>(pattern.size(), 8)));
}

void Game::rng_unpin(const UserId& id)
{
  Event& e = log_event(EventKind::rng_unpin);
  e.actor = id;
  if (users_.count(id) == 0) {
    e.detail = "ignored";
    return;
  }
  users_.at(id).pinned.reset();
  e.ok = true;
}

Outcome Game::finalize(int guess, Predicate p)
{
  if (outcome_) {
    return *outcome_; // the experiment ended at the first finalize
  }
  const auto verdict = judge_cleanness(transcript_, p);
  Outcome out;
  if (!verdict.clean) {
    out = Outcome::dirty;
  } else if (forgery_accepted_ || guess == bit_) {
    out = Outcome::win;
  } else {
    out = Outcome::lose;
  }
  Event& e = log_event(EventKind::finalize);
  e.ok = verdict.clean;
  e.detail = "guess=" + std::to_string(guess) + " outcome=" + to_string(out) +
             " predicate=" + to_string(p) +
             " violations=" + std::to_string(verdict.violations.size());
  outcome_ = out;
  return out;
}

namespace {

core::Frame forge_frame(bytes ciphertext, std::uint64_t index,
                        const UserId& sender,
                        std::optional<crypto::SigPublicKey> next_spk,
                        const crypto::SigSecretKey& ssk)
{
  core::Frame f;
  f.ciphertext = std::move(ciphertext);
  f.index = index;
  f.sender = sender;
  f.next_spk = next_spk;
  f.signature = crypto::sign(ssk, encoding::signing_payload(f));
  return f;
}

} // namespace

AttackReport attack_q1_q4(Game& g, const UserId& id1, const UserId& id2)
{
  AttackReport report;
  std::ostringstream log;

  // q1: the victim message is sent but withheld from delivery.
  const bytes m = to_bytes("pay bob 100");
  auto sent = g.o_send(id1, m);
  if (!sent.ok()) {
    log << "q1 send failed: " << to_string(sent.error());
    report.detail = log.str();
    return report;
  }
  const core::Frame honest = sent.value();
  log << "q1 send index=" << honest.index << " withheld\n";

  // q2: expose the sender and parse the signing key out of the state.
  auto exposed = g.o_expose(id1);
  if (!exposed.ok()) {
    log << "q2 expose failed: " << to_string(exposed.error());
    report.detail = log.str();
    return report;
  }
  auto st = encoding::deserialize_state(exposed.value());
  if (!st.ok() || !st.value().own_ssk) {
    log << "q2 exposed state carries no signing key\n";
    report.detail = log.str();
    return report;
  }
  const crypto::SigSecretKey ssk = *st.value().own_ssk;
  log << "q2 expose ok (signing key recovered)\n";

  // q3: surrender the withheld message's key.
  auto mk = g.o_expmk(id1, honest.index);
  if (!mk.ok()) {
    log << "q3 expmk failed: " << to_string(mk.error());
    report.detail = log.str();
    return report;
  }
  log << "q3 expmk index=" << honest.index << " ok\n";

  // q4: deliver a different message under the same index and identity.
  const bytes forged_m = to_bytes("pay eve 9999");
  const core::Frame forged =
      forge_frame(crypto::enc(mk.value(), forged_m), honest.index, id1,
                  honest.next_spk, ssk);
  auto out = g.o_receive(id2, id1, forged);
  report.accepted = out.ok;
  report.plaintext = out.plaintext;
  log << "q4 receive " << (out.ok ? "ACCEPTED" : "REJECTED") << " ("
      << out.detail << ")";
  report.detail = log.str();
  return report;
}

AttackReport attack_metadata(Game& g, const UserId& id1, const UserId& id2)
{
  AttackReport report;
  std::ostringstream log;

  const bytes m = to_bytes("pay bob 100");
  auto sent = g.o_send(id1, m);
  if (!sent.ok()) {
    log << "q1 send failed: " << to_string(sent.error());
    report.detail = log.str();
    return report;
  }
  const core::Frame honest = sent.value();
  log << "q1 send index=" << honest.index << " withheld\n";

  auto exposed = g.o_expose(id1);
  if (!exposed.ok()) {
    log << "q2 expose failed: " << to_string(exposed.error());
    report.detail = log.str();
    return report;
  }
  auto st = encoding::deserialize_state(exposed.value());
  if (!st.ok() || !st.value().own_ssk) {
    log << "q2 exposed state carries no signing key\n";
    report.detail = log.str();
    return report;
  }
  const crypto::SigSecretKey ssk = *st.value().own_ssk;
  log << "q2 expose ok (signing key recovered)\n";

  // Probe: shift only the index. The signature may verify but the keys no
  // longer line up, so decryption must refuse it.
  const core::Frame shifted = forge_frame(honest.ciphertext, honest.index + 1,
                                          id1, honest.next_spk, ssk);
  auto probe = g.o_receive(id2, id1, shifted);
  log << "probe index+1 " << (probe.ok ? "ACCEPTED" : "REJECTED") << " ("
      << probe.detail << ")\n";

  // Main: identical payload, fresh signature. No message key needed.
  core::Frame resigned = forge_frame(honest.ciphertext, honest.index, id1,
                                     honest.next_spk, ssk);
  if (resigned == honest) {
    // Vanishingly unlikely (signing is randomized); a replay would not
    // demonstrate anything.
    resigned.signature =
        crypto::sign(ssk, encoding::signing_payload(resigned));
  }
  auto out = g.o_receive(id2, id1, resigned);
  report.accepted = out.ok;
  report.plaintext = out.plaintext;
  log << "resigned receive " << (out.ok ? "ACCEPTED" : "REJECTED") << " ("
      << out.detail << ")";
  report.detail = log.str();
  return report;
}

} // namespace senderkeys::game
