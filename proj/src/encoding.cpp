#include "senderkeys/encoding.hpp"

#include <cstring>

namespace senderkeys::encoding {

namespace {

void put_str(bytes& out, std::string_view s)
{
  append_u64_be(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

void put_blob(bytes& out, std::span<const std::uint8_t> b)
{
  append_u64_be(out, b.size());
  out.insert(out.end(), b.begin(), b.end());
}

template <std::size_t N>
void put_fixed(bytes& out, const std::array<std::uint8_t, N>& a)
{
  out.insert(out.end(), a.begin(), a.end());
}

void put_chain(bytes& out, const crypto::ChainKey& ck)
{
  put_fixed(out, ck.secret);
  append_u64_be(out, ck.index);
}

/// Cursor over a wire buffer. Every accessor reports failure instead of
/// reading past the end, so decoders stay total on truncated input.
class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool u8(std::uint8_t& v)
  {
    if (pos_ >= data_.size()) {
      return false;
    }
    v = data_[pos_++];
    return true;
  }

  bool u64(std::uint64_t& v)
  {
    if (data_.size() - pos_ < 8 || pos_ > data_.size()) {
      return false;
    }
    v = read_u64_be(data_, pos_);
    pos_ += 8;
    return true;
  }

  bool blob(bytes& out)
  {
    std::uint64_t n = 0;
    if (!u64(n) || n > remaining()) {
      return false;
    }
    out.assign(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
               data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return true;
  }

  bool str(std::string& out)
  {
    bytes b;
    if (!blob(b)) {
      return false;
    }
    out.assign(b.begin(), b.end());
    return true;
  }

  template <std::size_t N>
  bool fixed(std::array<std::uint8_t, N>& out)
  {
    if (remaining() < N) {
      return false;
    }
    std::memcpy(out.data(), data_.data() + pos_, N);
    pos_ += N;
    return true;
  }

  bool chain(crypto::ChainKey& ck) { return fixed(ck.secret) && u64(ck.index); }

  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kFrameTag = 'F';
constexpr std::uint8_t kControlTag = 'C';
constexpr std::uint8_t kDistributionTag = 'D';
constexpr char kStateMagic[4] = {'S', 'K', 'S', '1'};

void put_payload_fields(bytes& out, const core::Frame& f)
{
  put_blob(out, f.ciphertext);
  append_u64_be(out, f.index);
  put_str(out, f.sender);
  if (f.next_spk) {
    out.push_back(0x01);
    append_u64_be(out, f.next_spk->size());
    put_fixed(out, *f.next_spk);
  } else {
    out.push_back(0x00);
  }
}

bool read_payload_fields(Reader& r, core::Frame& f)
{
  std::uint8_t flag = 0;
  if (!r.blob(f.ciphertext) || !r.u64(f.index) || !r.str(f.sender) ||
      !r.u8(flag)) {
    return false;
  }
  if (flag == 0x00) {
    f.next_spk.reset();
    return true;
  }
  if (flag != 0x01) {
    return false;
  }
  std::uint64_t len = 0;
  crypto::SigPublicKey spk{};
  if (!r.u64(len) || len != spk.size() || !r.fixed(spk)) {
    return false;
  }
  f.next_spk = spk;
  return true;
}

} // namespace

bytes signing_payload(const core::Frame& f)
{
  bytes out;
  put_payload_fields(out, f);
  return out;
}

bytes encode_frame(const core::Frame& f)
{
  bytes out;
  out.push_back(kFrameTag);
  put_payload_fields(out, f);
  put_blob(out, f.signature);
  return out;
}

std::optional<core::Frame> decode_frame(std::span<const std::uint8_t> wire)
{
  Reader r(wire);
  std::uint8_t tag = 0;
  core::Frame f;
  if (!r.u8(tag) || tag != kFrameTag || !read_payload_fields(r, f) ||
      !r.blob(f.signature) || !r.done()) {
    return std::nullopt;
  }
  return f;
}

bytes encode_control(const core::ControlMsg& t)
{
  bytes out;
  out.push_back(kControlTag);
  out.push_back(static_cast<std::uint8_t>(t.kind));
  append_u64_be(out, t.seq);
  put_str(out, t.actor);
  append_u64_be(out, t.subjects.size());
  for (const auto& s : t.subjects) {
    put_str(out, s);
  }
  append_u64_be(out, t.roster.size());
  for (const auto& s : t.roster) {
    put_str(out, s);
  }
  return out;
}

std::optional<core::ControlMsg>
decode_control(std::span<const std::uint8_t> wire)
{
  Reader r(wire);
  std::uint8_t tag = 0;
  std::uint8_t kind = 0;
  core::ControlMsg t;
  if (!r.u8(tag) || tag != kControlTag || !r.u8(kind) ||
      kind > static_cast<std::uint8_t>(core::ControlKind::update) ||
      !r.u64(t.seq) || !r.str(t.actor)) {
    return std::nullopt;
  }
  t.kind = static_cast<core::ControlKind>(kind);
  std::uint64_t n = 0;
  if (!r.u64(n) || n > r.remaining()) {
    return std::nullopt;
  }
  t.subjects.resize(n);
  for (auto& s : t.subjects) {
    if (!r.str(s)) {
      return std::nullopt;
    }
  }
  if (!r.u64(n) || n > r.remaining()) {
    return std::nullopt;
  }
  t.roster.resize(n);
  for (auto& s : t.roster) {
    if (!r.str(s)) {
      return std::nullopt;
    }
  }
  if (!r.done()) {
    return std::nullopt;
  }
  return t;
}

bytes encode_distribution(const core::SenderKeyDistribution& d)
{
  bytes out;
  out.push_back(kDistributionTag);
  put_str(out, d.from);
  put_str(out, d.to);
  put_fixed(out, d.key.spk);
  put_chain(out, d.key.ck);
  return out;
}

std::optional<core::SenderKeyDistribution>
decode_distribution(std::span<const std::uint8_t> wire)
{
  Reader r(wire);
  std::uint8_t tag = 0;
  core::SenderKeyDistribution d;
  if (!r.u8(tag) || tag != kDistributionTag || !r.str(d.from) ||
      !r.str(d.to) || !r.fixed(d.key.spk) || !r.chain(d.key.ck) ||
      !r.done()) {
    return std::nullopt;
  }
  return d;
}

bytes serialize_state(const core::UserState& st)
{
  bytes out;
  out.insert(out.end(), std::begin(kStateMagic), std::end(kStateMagic));
  out.push_back(static_cast<std::uint8_t>(st.config.variant));
  append_u64_be(out, st.config.n_max);
  append_u64_be(out, st.config.sig_block);
  put_str(out, st.me);

  append_u64_be(out, st.group.size());
  for (const auto& id : st.group) {
    put_str(out, id);
  }

  out.push_back(st.own_ssk ? 0x01 : 0x00);
  if (st.own_ssk) {
    put_fixed(out, *st.own_ssk);
  }
  out.push_back(st.own_spk ? 0x01 : 0x00);
  if (st.own_spk) {
    put_fixed(out, *st.own_spk);
  }
  out.push_back(st.own_chain ? 0x01 : 0x00);
  if (st.own_chain) {
    put_chain(out, *st.own_chain);
  }
  append_u64_be(out, st.own_sig_gen);
  out.push_back(st.shared_chain ? 0x01 : 0x00);
  if (st.shared_chain) {
    put_chain(out, *st.shared_chain);
  }

  append_u64_be(out, st.peer_keys.size());
  for (const auto& [id, entry] : st.peer_keys) {
    put_str(out, id);
    put_fixed(out, entry.spk);
    put_chain(out, entry.chain);
    append_u64_be(out, entry.sig_gen);
    out.push_back(entry.prev_spk ? 0x01 : 0x00);
    if (entry.prev_spk) {
      put_fixed(out, *entry.prev_spk);
    }
  }

  append_u64_be(out, st.skipped.size());
  for (const auto& [key, mk] : st.skipped) {
    put_str(out, key.first);
    append_u64_be(out, key.second);
    put_fixed(out, mk.secret);
    append_u64_be(out, mk.index);
  }

  append_u64_be(out, st.shared_skipped.size());
  for (const auto& [idx, mk] : st.shared_skipped) {
    append_u64_be(out, idx);
    put_fixed(out, mk.secret);
    append_u64_be(out, mk.index);
  }

  append_u64_be(out, st.recv_index.size());
  for (const auto& [id, idx] : st.recv_index) {
    put_str(out, id);
    append_u64_be(out, idx);
  }

  append_u64_be(out, st.distributed_to.size());
  for (const auto& id : st.distributed_to) {
    put_str(out, id);
  }

  append_u64_be(out, st.processed_controls.size());
  for (auto seq : st.processed_controls) {
    append_u64_be(out, seq);
  }
  return out;
}

Result<core::UserState>
deserialize_state(std::span<const std::uint8_t> wire)
{
  Reader r(wire);
  std::array<std::uint8_t, 4> magic{};
  if (!r.fixed(magic) ||
      std::memcmp(magic.data(), kStateMagic, sizeof(kStateMagic)) != 0) {
    return Error::bad_argument;
  }
  core::UserState st;
  std::uint8_t variant = 0;
  if (!r.u8(variant) ||
      variant > static_cast<std::uint8_t>(core::Variant::combined) ||
      !r.u64(st.config.n_max) || !r.u64(st.config.sig_block) ||
      !r.str(st.me)) {
    return Error::bad_argument;
  }
  st.config.variant = static_cast<core::Variant>(variant);

  std::uint64_t n = 0;
  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string id;
    if (!r.str(id)) {
      return Error::bad_argument;
    }
    st.group.insert(std::move(id));
  }

  std::uint8_t flag = 0;
  if (!r.u8(flag)) {
    return Error::bad_argument;
  }
  if (flag) {
    crypto::SigSecretKey ssk{};
    if (!r.fixed(ssk)) {
      return Error::bad_argument;
    }
    st.own_ssk = ssk;
  }
  if (!r.u8(flag)) {
    return Error::bad_argument;
  }
  if (flag) {
    crypto::SigPublicKey spk{};
    if (!r.fixed(spk)) {
      return Error::bad_argument;
    }
    st.own_spk = spk;
  }
  if (!r.u8(flag)) {
    return Error::bad_argument;
  }
  if (flag) {
    crypto::ChainKey ck;
    if (!r.chain(ck)) {
      return Error::bad_argument;
    }
    st.own_chain = ck;
  }
  if (!r.u64(st.own_sig_gen) || !r.u8(flag)) {
    return Error::bad_argument;
  }
  if (flag) {
    crypto::ChainKey ck;
    if (!r.chain(ck)) {
      return Error::bad_argument;
    }
    st.shared_chain = ck;
  }

  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string id;
    core::PeerEntry entry;
    if (!r.str(id) || !r.fixed(entry.spk) || !r.chain(entry.chain) ||
        !r.u64(entry.sig_gen) || !r.u8(flag)) {
      return Error::bad_argument;
    }
    if (flag) {
      crypto::SigPublicKey prev{};
      if (!r.fixed(prev)) {
        return Error::bad_argument;
      }
      entry.prev_spk = prev;
    }
    st.peer_keys.emplace(std::move(id), std::move(entry));
  }

  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string id;
    std::uint64_t idx = 0;
    crypto::MessageKey mk;
    if (!r.str(id) || !r.u64(idx) || !r.fixed(mk.secret) || !r.u64(mk.index)) {
      return Error::bad_argument;
    }
    st.skipped.emplace(std::make_pair(std::move(id), idx), mk);
  }

  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::uint64_t idx = 0;
    crypto::MessageKey mk;
    if (!r.u64(idx) || !r.fixed(mk.secret) || !r.u64(mk.index)) {
      return Error::bad_argument;
    }
    st.shared_skipped.emplace(idx, mk);
  }

  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string id;
    std::uint64_t idx = 0;
    if (!r.str(id) || !r.u64(idx)) {
      return Error::bad_argument;
    }
    st.recv_index.emplace(std::move(id), idx);
  }

  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string id;
    if (!r.str(id)) {
      return Error::bad_argument;
    }
    st.distributed_to.insert(std::move(id));
  }

  if (!r.u64(n) || n > r.remaining()) {
    return Error::bad_argument;
  }
  for (std::uint64_t k = 0; k < n; ++k) {
    std::uint64_t seq = 0;
    if (!r.u64(seq)) {
      return Error::bad_argument;
    }
    st.processed_controls.insert(seq);
  }

  if (!r.done()) {
    return Error::bad_argument;
  }
  return st;
}

} // namespace senderkeys::encoding
