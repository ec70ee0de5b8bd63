#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include <senderkeys/core.hpp>
#include <senderkeys/encoding.hpp>
#include <senderkeys/variants.hpp>

using namespace senderkeys;

namespace {

/// Small fixture: a created group with every member having processed the
/// creator's announcement and key distribution.
struct Group {
  std::map<core::UserId, core::UserState> st;
  crypto::SeededRng rng{99};
  std::uint64_t next_seq = 0;

  explicit Group(const std::vector<core::UserId>& members,
                 core::ProtocolConfig cfg = {})
  {
    for (const auto& id : members) {
      st.emplace(id, core::init(cfg, id));
    }
    const auto& creator = members.front();
    auto created = core::exec_create(members, st.at(creator), rng);
    REQUIRE(created.ok());
    auto control = created.value().control;
    control.seq = next_seq++;
    st.at(creator) =
        core::mark_control_processed(created.value().st, control.seq);
    for (const auto& id : members) {
      if (id == creator) {
        continue;
      }
      auto joined = core::proc(control, st.at(id));
      REQUIRE(joined.ok());
      st.at(id) = joined.take();
    }
    for (const auto& d : created.value().distributions) {
      auto installed = core::proc_distribution(d, st.at(d.to));
      REQUIRE(installed.ok());
      st.at(d.to) = installed.take();
    }
  }

  /// Sends from `who` and hands the distributions straight to recipients.
  core::Frame say(const core::UserId& who, const std::string& text)
  {
    auto sent = core::send(to_bytes(text), st.at(who), rng);
    REQUIRE(sent.ok());
    st.at(who) = sent.value().st;
    for (const auto& d : sent.value().distributions) {
      auto installed = core::proc_distribution(d, st.at(d.to));
      REQUIRE(installed.ok());
      st.at(d.to) = installed.take();
    }
    return sent.value().frame;
  }

  std::string hear(const core::UserId& who, const core::Frame& f)
  {
    auto got = core::recv(f, st.at(who));
    REQUIRE(got.ok());
    st.at(who) = got.value().st;
    return to_string(got.value().plaintext);
  }
};

bytes state_bytes(const core::UserState& st)
{
  return encoding::serialize_state(st);
}

} // namespace

TEST_CASE("three members exchange messages and chain indices advance")
{
  Group g({"A", "B", "C"});
  const auto f0 = g.say("A", "zero");
  const auto f1 = g.say("A", "one");
  CHECK(f0.index == 0);
  CHECK(f1.index == 1);
  CHECK(g.hear("B", f0) == "zero");
  CHECK(g.hear("C", f0) == "zero");
  CHECK(g.hear("B", f1) == "one");
  CHECK(g.hear("C", f1) == "one");

  const auto fb = g.say("B", "reply");
  CHECK(fb.index == 0); // B's own chain starts at zero
  CHECK(g.hear("A", fb) == "reply");
  CHECK(g.hear("C", fb) == "reply");

  CHECK(g.st.at("A").own_chain->index == 2);
  CHECK(g.st.at("B").recv_index.at("A") == 2);
  CHECK(g.st.at("C").recv_index.at("A") == 2);
  CHECK(g.st.at("A").recv_index.at("B") == 1);
}

TEST_CASE("receive state matches the peer entry index everywhere")
{
  Group g({"A", "B"});
  for (int k = 0; k < 5; ++k) {
    const auto f = g.say("A", "m" + std::to_string(k));
    g.hear("B", f);
    const auto& bob = g.st.at("B");
    CHECK(bob.recv_index.at("A") == bob.peer_keys.at("A").chain.index);
  }
}

TEST_CASE("sender keys are distributed lazily and only once")
{
  auto cfg = variants::config_for(core::Variant::baseline);
  crypto::SeededRng rng(5);
  auto a = core::init(cfg, "A");
  auto created = core::exec_create({"A", "B", "C"}, a, rng);
  REQUIRE(created.ok());
  a = created.value().st;
  CHECK(created.value().distributions.size() == 2); // B and C at create

  auto sent = core::send(to_bytes("x"), a, rng);
  REQUIRE(sent.ok());
  CHECK(sent.value().distributions.empty()); // nothing new to hand out
  a = sent.value().st;

  auto added = core::exec_add("D", a);
  REQUIRE(added.ok());
  a = added.value().st;
  auto sent2 = core::send(to_bytes("y"), a, rng);
  REQUIRE(sent2.ok());
  REQUIRE(sent2.value().distributions.size() == 1); // top-up for D only
  const auto& dist = sent2.value().distributions.front();
  CHECK(dist.to == "D");
  // The chain travels at the pre-ratchet index so D can read this very
  // message but nothing earlier.
  CHECK(dist.key.ck.index == sent2.value().frame.index);
}

TEST_CASE("a joiner reads from the distributed index onward, never earlier")
{
  Group g({"A", "B"});
  const auto f0 = g.say("A", "early");
  const auto f1 = g.say("A", "also early");
  g.hear("B", f0);
  g.hear("B", f1);

  // D joins; everyone processes the announcement.
  auto added = core::exec_add("D", g.st.at("A"));
  REQUIRE(added.ok());
  auto control = added.value().control;
  control.seq = g.next_seq++;
  g.st.at("A") = core::mark_control_processed(added.value().st, control.seq);
  auto b2 = core::proc(control, g.st.at("B"));
  REQUIRE(b2.ok());
  g.st.at("B") = b2.take();
  auto d = core::init(variants::config_for(core::Variant::baseline), "D");
  auto joined = core::proc(control, d);
  REQUIRE(joined.ok());
  d = joined.take();
  CHECK(d.group == std::set<core::UserId>{"A", "B", "D"});
  g.st.emplace("D", d);

  const auto f2 = g.say("A", "fresh for D");
  CHECK(g.hear("D", f2) == "fresh for D");
  auto old = core::recv(f0, g.st.at("D"));
  CHECK(!old.ok());
  CHECK(old.error() == Error::skipped_key_missing);
}

TEST_CASE("out-of-order delivery stores and consumes skipped keys")
{
  Group g({"A", "B"});
  std::vector<core::Frame> f;
  for (int k = 0; k < 6; ++k) {
    f.push_back(g.say("A", "m" + std::to_string(k)));
  }
  const std::vector<int> order = {0, 2, 5, 1, 4, 3};
  const std::vector<std::size_t> stored_after = {0, 1, 3, 2, 1, 0};
  for (std::size_t k = 0; k < order.size(); ++k) {
    CHECK(g.hear("B", f[static_cast<std::size_t>(order[k])]) ==
          "m" + std::to_string(order[k]));
    CHECK(g.st.at("B").skipped.size() == stored_after[k]);
  }
  // Every straggler consumed; replays now fail without touching state.
  const bytes before = state_bytes(g.st.at("B"));
  auto replay = core::recv(f[2], g.st.at("B"));
  CHECK(!replay.ok());
  CHECK(replay.error() == Error::skipped_key_missing);
  CHECK(state_bytes(g.st.at("B")) == before);
}

TEST_CASE("the skipped-key budget is enforced before any work is done")
{
  auto cfg = variants::config_for(core::Variant::baseline);
  cfg.n_max = 5;
  Group g({"A", "B"}, cfg);
  std::vector<core::Frame> f;
  for (int k = 0; k < 8; ++k) {
    f.push_back(g.say("A", "m" + std::to_string(k)));
  }
  // Index 6 would require setting aside keys 0..5 = 6 > 5.
  const bytes before = state_bytes(g.st.at("B"));
  auto too_far = core::recv(f[6], g.st.at("B"));
  CHECK(!too_far.ok());
  CHECK(too_far.error() == Error::skipped_capacity_exceeded);
  CHECK(state_bytes(g.st.at("B")) == before);

  // Index 5 is exactly within budget.
  CHECK(g.hear("B", f[5]) == "m5");
  CHECK(g.st.at("B").skipped.size() == 5);
  // The budget counts stored keys: one more straggler jump must fail.
  auto refill = core::recv(f[7], g.st.at("B"));
  CHECK(!refill.ok());
  CHECK(refill.error() == Error::skipped_capacity_exceeded);
  // Draining one stored key frees room.
  CHECK(g.hear("B", f[0]) == "m0");
  CHECK(g.hear("B", f[7]) == "m7");
}

TEST_CASE("every receive error leaves the state byte-identical")
{
  Group g({"A", "B", "C"});
  const auto honest = g.say("A", "legit");
  g.hear("B", honest);
  const bytes before = state_bytes(g.st.at("B"));

  // Unknown sender.
  core::Frame f = honest;
  f.sender = "Z";
  auto r = core::recv(f, g.st.at("B"));
  CHECK(r.error() == Error::pending_sender_key);
  CHECK(state_bytes(g.st.at("B")) == before);

  // Bad signature.
  f = g.say("A", "next");
  f.signature[4] ^= 0x10;
  r = core::recv(f, g.st.at("B"));
  CHECK(r.error() == Error::signature_invalid);
  CHECK(state_bytes(g.st.at("B")) == before);

  // Tampered ciphertext (signature re-checked first, so corrupt both).
  f.ciphertext.back() ^= 0x01;
  r = core::recv(f, g.st.at("B"));
  CHECK(r.error() == Error::signature_invalid);
  CHECK(state_bytes(g.st.at("B")) == before);

  // Own frames bounce (no entry for yourself).
  r = core::recv(honest, g.st.at("A"));
  CHECK(r.error() == Error::pending_sender_key);
}

TEST_CASE("the signature binds ciphertext, chain index, and sender identity")
{
  Group g({"A", "B", "C"});
  // C sends once so B has C's verification key installed; otherwise a
  // sender swap would be indistinguishable from a missing key.
  g.hear("B", g.say("C", "warm-up"));

  const auto honest = g.say("A", "bound");
  const bytes before = state_bytes(g.st.at("B"));

  // Flip one ciphertext byte.
  core::Frame f = honest;
  f.ciphertext[0] ^= 0x01;
  auto r = core::recv(f, g.st.at("B"));
  CHECK(r.error() == Error::signature_invalid);

  // Bump the chain index.
  f = honest;
  f.index += 1;
  r = core::recv(f, g.st.at("B"));
  CHECK(r.error() == Error::signature_invalid);

  // Re-attribute the frame to another roster member.
  f = honest;
  f.sender = "C";
  r = core::recv(f, g.st.at("B"));
  CHECK(r.error() == Error::signature_invalid);

  // None of the mutants touched B, and the untouched frame still reads.
  CHECK(state_bytes(g.st.at("B")) == before);
  CHECK(g.hear("B", honest) == "bound");
}

TEST_CASE("forward secrecy: consumed key material leaves the state")
{
  Group g({"A", "B"});
  // Record A's chain secrets and derived message keys as they are minted.
  std::vector<bytes> dead;
  for (int k = 0; k < 4; ++k) {
    const auto ck = *g.st.at("A").own_chain;
    const auto mk = crypto::kdf_mk(ck);
    dead.push_back(bytes(ck.secret.begin(), ck.secret.end()));
    dead.push_back(bytes(mk.secret.begin(), mk.secret.end()));
    const auto f = g.say("A", "tick" + std::to_string(k));
    g.hear("B", f);
  }
  for (const auto& id : {"A", "B"}) {
    const bytes snapshot = state_bytes(g.st.at(id));
    for (const auto& secret : dead) {
      CHECK(!contains(snapshot, secret));
    }
  }
}

TEST_CASE("group creation rejects bad rosters and double creation")
{
  crypto::SeededRng rng(1);
  auto cfg = variants::config_for(core::Variant::baseline);
  auto a = core::init(cfg, "A");
  CHECK(core::exec_create({"B", "C"}, a, rng).error() ==
        Error::creator_not_in_members);
  CHECK(core::exec_create({}, a, rng).error() ==
        Error::creator_not_in_members);
  auto ok = core::exec_create({"A", "B"}, a, rng);
  REQUIRE(ok.ok());
  CHECK(core::exec_create({"A", "C"}, ok.value().st, rng).error() ==
        Error::group_exists);

  // Processing someone else's roster that excludes me is refused.
  auto control = ok.value().control;
  control.seq = 9;
  auto c = core::init(cfg, "C");
  CHECK(core::proc(control, c).error() == Error::not_a_member);

  // Duplicate announcement is refused once processed.
  auto b = core::init(cfg, "B");
  auto joined = core::proc(control, b);
  REQUIRE(joined.ok());
  CHECK(core::proc(control, joined.value()).error() ==
        Error::duplicate_control);
}

TEST_CASE("membership operation errors")
{
  Group g({"A", "B"});
  CHECK(core::exec_add("B", g.st.at("A")).error() == Error::already_member);
  CHECK(core::exec_remove("A", g.st.at("A")).error() == Error::self_remove);
  CHECK(core::exec_remove("Z", g.st.at("A")).error() == Error::not_a_member);

  auto cfg = variants::config_for(core::Variant::baseline);
  auto loner = core::init(cfg, "L");
  crypto::SeededRng rng(3);
  CHECK(core::exec_add("Z", loner).error() == Error::no_group);
  CHECK(core::exec_remove("Z", loner).error() == Error::no_group);
  CHECK(core::send(to_bytes("x"), loner, rng).error() == Error::no_group);
  CHECK(!loner.own_sender_key().has_value());
}

TEST_CASE("removal wipes every key and the group starts over")
{
  Group g({"A", "B", "C"});
  const auto f0 = g.say("A", "before");
  g.hear("B", f0);
  g.hear("C", f0);
  const auto fb = g.say("B", "also before");
  g.hear("A", fb);
  g.hear("C", fb);

  // Collect the live secrets of the current epoch.
  std::vector<bytes> old_secrets;
  for (const auto& id : {"A", "B", "C"}) {
    const auto& st = g.st.at(id);
    if (st.own_chain) {
      old_secrets.push_back(
          bytes(st.own_chain->secret.begin(), st.own_chain->secret.end()));
    }
    if (st.own_ssk) {
      old_secrets.push_back(bytes(st.own_ssk->begin(), st.own_ssk->end()));
    }
  }

  auto removed = core::exec_remove("C", g.st.at("A"));
  REQUIRE(removed.ok());
  auto control = removed.value().control;
  control.seq = g.next_seq++;
  g.st.at("A") = core::mark_control_processed(removed.value().st, control.seq);
  CHECK(control.roster == std::vector<core::UserId>{"A", "B"});

  // The remover is already clean before anyone else processes anything.
  CHECK(!g.st.at("A").own_chain);
  CHECK(!g.st.at("A").own_ssk);
  CHECK(g.st.at("A").peer_keys.empty());
  CHECK(g.st.at("A").skipped.empty());

  auto b2 = core::proc(control, g.st.at("B"));
  REQUIRE(b2.ok());
  g.st.at("B") = b2.take();
  auto c2 = core::proc(control, g.st.at("C"));
  REQUIRE(c2.ok());
  g.st.at("C") = c2.take();
  CHECK(g.st.at("C").group.empty());

  for (const auto& id : {"A", "B"}) {
    const bytes snapshot = state_bytes(g.st.at(id));
    for (const auto& secret : old_secrets) {
      CHECK(!contains(snapshot, secret));
    }
  }

  // B speaks in the fresh epoch: new key minted, redistributed to A only.
  auto sent = core::send(to_bytes("fresh"), g.st.at("B"), g.rng);
  REQUIRE(sent.ok());
  g.st.at("B") = sent.value().st;
  REQUIRE(sent.value().minted_chain.has_value());
  CHECK(sent.value().distributions.size() == 1);
  CHECK(sent.value().distributions.front().to == "A");
  for (const auto& secret : old_secrets) {
    CHECK(!contains(state_bytes(g.st.at("B")), secret));
  }

  // The removed member cannot process the new traffic.
  auto denied = core::recv(sent.value().frame, g.st.at("C"));
  CHECK(denied.error() == Error::no_group);

  // A installs B's fresh key and reads the message.
  auto installed =
      core::proc_distribution(sent.value().distributions.front(),
                              g.st.at("A"));
  REQUIRE(installed.ok());
  g.st.at("A") = installed.take();
  auto got = core::recv(sent.value().frame, g.st.at("A"));
  REQUIRE(got.ok());
  CHECK(to_string(got.value().plaintext) == "fresh");
}

TEST_CASE("stale frames from the removed epoch are rejected after the wipe")
{
  Group g({"A", "B", "C"});
  const auto old_frame = g.say("A", "old epoch");
  auto removed = core::exec_remove("C", g.st.at("B"));
  REQUIRE(removed.ok());
  auto control = removed.value().control;
  control.seq = g.next_seq++;
  g.st.at("B") = core::mark_control_processed(removed.value().st, control.seq);
  auto a2 = core::proc(control, g.st.at("A"));
  REQUIRE(a2.ok());
  g.st.at("A") = a2.take();

  auto r = core::recv(old_frame, g.st.at("B"));
  CHECK(r.error() == Error::pending_sender_key);
}

TEST_CASE("distribution processing guards recipient, sender and membership")
{
  Group g({"A", "B", "C"});
  auto sent = core::send(to_bytes("x"), g.st.at("A"), g.rng);
  REQUIRE(sent.ok());
  // Distributions were already consumed at create; craft one by hand.
  core::SenderKeyDistribution d{"A", "B", *g.st.at("A").own_sender_key()};
  CHECK(core::proc_distribution(d, g.st.at("C")).error() ==
        Error::wrong_recipient);
  core::SenderKeyDistribution self{"B", "B", d.key};
  CHECK(core::proc_distribution(self, g.st.at("B")).error() ==
        Error::bad_argument);
  core::SenderKeyDistribution outsider{"Z", "B", d.key};
  CHECK(core::proc_distribution(outsider, g.st.at("B")).error() ==
        Error::not_a_member);
}

TEST_CASE("a re-distributed key replaces the old one and clears stale stragglers")
{
  Group g({"A", "B"});
  std::vector<core::Frame> f;
  for (int k = 0; k < 3; ++k) {
    f.push_back(g.say("A", "m" + std::to_string(k)));
  }
  g.hear("B", f[2]); // B now stores skipped keys for 0 and 1
  CHECK(g.st.at("B").skipped.size() == 2);

  auto updated = variants::exec_update(g.st.at("A"), g.rng);
  REQUIRE(updated.ok());
  g.st.at("A") = updated.value().st;
  const auto& d = updated.value().distributions.front();
  auto installed = core::proc_distribution(d, g.st.at("B"));
  REQUIRE(installed.ok());
  g.st.at("B") = installed.take();
  CHECK(g.st.at("B").skipped.empty());
  CHECK(g.st.at("B").peer_keys.at("A").chain.index == 0);

  // Old-epoch stragglers are gone for good.
  auto stale = core::recv(f[0], g.st.at("B"));
  CHECK(!stale.ok());

  // New chain flows.
  const auto nf = g.say("A", "renewed");
  CHECK(g.hear("B", nf) == "renewed");
  CHECK(nf.index == 0);
}

TEST_CASE("control messages from non-members and duplicates are refused")
{
  Group g({"A", "B", "C"});
  core::ControlMsg bogus;
  bogus.kind = core::ControlKind::remove;
  bogus.actor = "Z"; // not a member
  bogus.subjects = {"C"};
  bogus.seq = 77;
  CHECK(core::proc(bogus, g.st.at("B")).error() == Error::actor_not_member);

  auto removed = core::exec_remove("C", g.st.at("A"));
  REQUIRE(removed.ok());
  auto control = removed.value().control;
  control.seq = 5;
  auto b2 = core::proc(control, g.st.at("B"));
  REQUIRE(b2.ok());
  CHECK(core::proc(control, b2.value()).error() == Error::duplicate_control);
}

TEST_CASE("the member is always part of a non-empty roster")
{
  Group g({"A", "B", "C"});
  for (const auto& [id, st] : g.st) {
    CHECK(st.in_group());
    CHECK(st.group.count(id) == 1);
  }
  auto removed = core::exec_remove("B", g.st.at("A"));
  REQUIRE(removed.ok());
  CHECK(removed.value().st.group.count("A") == 1);
}

TEST_CASE("identical seeds replay to byte-identical states")
{
  const auto run = [](std::uint64_t seed) {
    crypto::SeededRng rng(seed);
    auto cfg = variants::config_for(core::Variant::baseline);
    auto a = core::init(cfg, "A");
    auto b = core::init(cfg, "B");
    auto created = core::exec_create({"A", "B"}, a, rng);
    REQUIRE(created.ok());
    a = created.value().st;
    auto control = created.value().control;
    control.seq = 0;
    a = core::mark_control_processed(a, 0);
    b = core::proc(control, b).take();
    b = core::proc_distribution(created.value().distributions.front(), b)
            .take();
    for (int k = 0; k < 5; ++k) {
      auto sent = core::send(to_bytes("m" + std::to_string(k)), a, rng);
      REQUIRE(sent.ok());
      a = sent.value().st;
      b = core::recv(sent.value().frame, b).take().st;
    }
    bytes out = encoding::serialize_state(a);
    append(out, encoding::serialize_state(b));
    return out;
  };
  CHECK(run(123) == run(123));
  CHECK(run(123) != run(124));
}
