#include "senderkeys/variants.hpp"

#include "senderkeys/encoding.hpp"

namespace senderkeys::variants {

std::optional<std::array<std::uint8_t, 32>>
secret_state_digest(const core::UserState& st)
{
  bytes secrets;
  if (st.own_ssk) {
    secrets.insert(secrets.end(), st.own_ssk->begin(), st.own_ssk->end());
  }
  if (st.own_chain) {
    secrets.insert(secrets.end(), st.own_chain->secret.begin(),
                   st.own_chain->secret.end());
  }
  if (st.shared_chain) {
    secrets.insert(secrets.end(), st.shared_chain->secret.begin(),
                   st.shared_chain->secret.end());
  }
  for (const auto& [id, entry] : st.peer_keys) {
    (void)id;
    secrets.insert(secrets.end(), entry.chain.secret.begin(),
                   entry.chain.secret.end());
  }
  for (const auto& [key, mk] : st.skipped) {
    (void)key;
    secrets.insert(secrets.end(), mk.secret.begin(), mk.secret.end());
  }
  for (const auto& [idx, mk] : st.shared_skipped) {
    (void)idx;
    secrets.insert(secrets.end(), mk.secret.begin(), mk.secret.end());
  }
  if (secrets.empty()) {
    return std::nullopt;
  }
  return crypto::sha256(secrets);
}

crypto::Seed32 hardened_seed(const crypto::Seed32& rand,
                             const core::UserState& st)
{
  const auto digest = secret_state_digest(st);
  if (!digest) {
    return rand;
  }
  bytes input(rand.begin(), rand.end());
  input.insert(input.end(), digest->begin(), digest->end());
  return crypto::sha256(input);
}

Result<UpdateResult> exec_update(const core::UserState& st, crypto::Rng& rng)
{
  if (!st.in_group()) {
    return Error::no_group;
  }
  if (st.config.single_chain()) {
    return Error::bad_argument;
  }
  UpdateResult out;
  out.st = st;

  crypto::Seed32 rand = rng.draw32();
  if (st.config.hardened_rand()) {
    rand = hardened_seed(rand, st);
  }
  out.st.own_chain = crypto::ChainKey{rand, 0};
  crypto::Seed32 sig_seed = rng.draw32();
  if (st.config.hardened_rand()) {
    sig_seed = hardened_seed(sig_seed, st);
  }
  const auto pair = crypto::sig_gen(sig_seed);
  out.st.own_ssk = pair.secret_key;
  out.st.own_spk = pair.public_key;
  out.st.own_sig_gen = 0;
  out.st.distributed_to.clear();

  const core::SenderKey key{*out.st.own_spk, *out.st.own_chain};
  for (const auto& m : out.st.group) {
    if (m == out.st.me) {
      continue;
    }
    out.distributions.push_back({out.st.me, m, key});
    out.st.distributed_to.insert(m);
  }
  out.control.kind = core::ControlKind::update;
  out.control.actor = st.me;
  out.control.subjects = {st.me};
  out.control.roster.assign(st.group.begin(), st.group.end());
  return out;
}

core::ProtocolConfig config_for(core::Variant v,
                                std::uint64_t n_max,
                                std::uint64_t sig_block)
{
  core::ProtocolConfig cfg;
  cfg.variant = v;
  cfg.n_max = n_max;
  cfg.sig_block = sig_block == 0 ? 1 : sig_block;
  return cfg;
}

} // namespace senderkeys::variants
