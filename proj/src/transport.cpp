#include "senderkeys/transport.hpp"

#include <sstream>

#include "senderkeys/encoding.hpp"

namespace senderkeys::transport {

namespace {

std::string describe(const Payload& p)
{
  std::ostringstream os;
  if (const auto* f = std::get_if<core::Frame>(&p)) {
    os << "kind=frame sender=" << f->sender << " index=" << f->index
       << " ctlen=" << f->ciphertext.size();
  } else {
    const auto& t = std::get<core::ControlMsg>(p);
    os << "kind=" << core::to_string(t.kind) << " actor=" << t.actor;
    if (!t.subjects.empty()) {
      os << " subject=" << t.subjects.front();
    }
  }
  return os.str();
}

} // namespace

Server::Server(DeliveryMode mode, bool reject_index_conflicts)
    : mode_(mode), reject_index_conflicts_(reject_index_conflicts)
{
}

void Server::emit(const std::string& line)
{
  if (trace_) {
    trace_(line);
  }
}

Result<std::uint64_t> Server::submit(Payload p)
{
  if (reject_index_conflicts_) {
    if (const auto* f = std::get_if<core::Frame>(&p)) {
      if (claimed_indices_.count(f->index) > 0) {
        emit("submit rejected index-conflict index=" +
             std::to_string(f->index) + " sender=" + f->sender);
        return Error::index_conflict;
      }
      claimed_indices_.insert(f->index);
    } else if (std::get<core::ControlMsg>(p).kind ==
               core::ControlKind::remove) {
      claimed_indices_.clear();
    }
  }
  const auto seq = static_cast<std::uint64_t>(log_.size());
  if (auto* t = std::get_if<core::ControlMsg>(&p)) {
    t->seq = seq;
  }
  log_.push_back(std::move(p));
  emit("submit seq=" + std::to_string(seq) + " " + describe(log_.back()));
  return seq;
}

Result<Payload> Server::deliver(const core::UserId& to, std::uint64_t seq,
                                bool redeliver)
{
  if (seq >= log_.size()) {
    return Error::unknown_seq;
  }
  auto& seen = delivered_[to];
  if (!redeliver && seen.count(seq) > 0) {
    return Error::already_delivered;
  }
  if (mode_ == DeliveryMode::in_order) {
    const auto next = next_pending(to);
    if (!redeliver && (!next || *next != seq)) {
      return Error::bad_argument;
    }
  }
  seen.insert(seq);
  emit("deliver to=" + to + " seq=" + std::to_string(seq) +
       (redeliver ? " redeliver" : "") + " " + describe(log_[seq]));
  return log_[seq];
}

std::optional<std::uint64_t>
Server::next_pending(const core::UserId& to) const
{
  const auto it = delivered_.find(to);
  for (std::uint64_t seq = 0; seq < log_.size(); ++seq) {
    if (it == delivered_.end() || it->second.count(seq) == 0) {
      return seq;
    }
  }
  return std::nullopt;
}

bool Server::delivered(const core::UserId& to, std::uint64_t seq) const
{
  const auto it = delivered_.find(to);
  return it != delivered_.end() && it->second.count(seq) > 0;
}

bytes Server::log_bytes() const
{
  bytes out;
  for (const auto& p : log_) {
    const bytes one = std::holds_alternative<core::Frame>(p)
                          ? encoding::encode_frame(std::get<core::Frame>(p))
                          : encoding::encode_control(
                                std::get<core::ControlMsg>(p));
    out.insert(out.end(), one.begin(), one.end());
  }
  return out;
}

void TwoPartyChannels::emit(const std::string& line)
{
  if (trace_) {
    trace_(line);
  }
}

void TwoPartyChannels::send(const core::SenderKeyDistribution& d)
{
  queues_[{d.from, d.to}].push_back({counter_++, d});
  emit("tp_send from=" + d.from + " to=" + d.to +
       " queued=" + std::to_string(queue_length(d.from, d.to)));
}

Result<core::SenderKeyDistribution>
TwoPartyChannels::deliver(const core::UserId& from, const core::UserId& to)
{
  const auto it = queues_.find({from, to});
  if (it == queues_.end() || it->second.empty()) {
    return Error::empty_channel;
  }
  core::SenderKeyDistribution d = std::move(it->second.front().d);
  it->second.pop_front();
  emit("tp_deliver from=" + from + " to=" + to);
  return d;
}

Result<core::SenderKeyDistribution>
TwoPartyChannels::deliver_next(const core::UserId& to)
{
  std::deque<Item>* best = nullptr;
  for (auto& [key, q] : queues_) {
    if (key.second != to || q.empty()) {
      continue;
    }
    if (best == nullptr || q.front().stamp < best->front().stamp) {
      best = &q;
    }
  }
  if (best == nullptr) {
    return Error::empty_channel;
  }
  core::SenderKeyDistribution d = std::move(best->front().d);
  best->pop_front();
  emit("tp_deliver from=" + d.from + " to=" + to);
  return d;
}

std::size_t TwoPartyChannels::queue_length(const core::UserId& from,
                                           const core::UserId& to) const
{
  const auto it = queues_.find({from, to});
  return it == queues_.end() ? 0 : it->second.size();
}

std::size_t TwoPartyChannels::pending_for(const core::UserId& to) const
{
  std::size_t n = 0;
  for (const auto& [key, q] : queues_) {
    if (key.second == to) {
      n += q.size();
    }
  }
  return n;
}

std::size_t TwoPartyChannels::pending_total() const
{
  std::size_t n = 0;
  for (const auto& [key, q] : queues_) {
    (void)key;
    n += q.size();
  }
  return n;
}

} // namespace senderkeys::transport
