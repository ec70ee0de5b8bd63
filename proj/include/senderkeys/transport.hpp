#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <variant>
#include <vector>

#include "senderkeys/core.hpp"
#include "senderkeys/result.hpp"

namespace senderkeys::transport {

using Payload = std::variant<core::Frame, core::ControlMsg>;

enum class DeliveryMode {
  in_order,    // each user receives the log strictly in sequence order
  adversarial, // arbitrary order, withholding and replay allowed
};

/// Untrusted append-only delivery service. Assigns sequence numbers on
/// submission and tracks a per-user delivery cursor; in adversarial mode the
/// caller picks what gets delivered and when.
class Server {
public:
  using TraceFn = std::function<void(const std::string&)>;

  explicit Server(DeliveryMode mode = DeliveryMode::adversarial,
                  bool reject_index_conflicts = false);

  /// Appends to the log and returns the assigned sequence number. Control
  /// messages are stored with seq filled in. With index-conflict rejection
  /// on (single-chain mode), a frame reusing an already-claimed chain index
  /// is refused and not logged; a removal resets the claimed set, matching
  /// the chain starting over.
  Result<std::uint64_t> submit(Payload p);

  /// Hands one log entry to a user. Refuses double delivery unless redeliver
  /// is set; in in-order mode refuses anything but the user's next pending
  /// entry.
  Result<Payload> deliver(const core::UserId& to, std::uint64_t seq,
                          bool redeliver = false);

  std::optional<std::uint64_t> next_pending(const core::UserId& to) const;
  bool delivered(const core::UserId& to, std::uint64_t seq) const;
  std::size_t size() const { return log_.size(); }
  const Payload& entry(std::uint64_t seq) const { return log_.at(seq); }

  /// Every logged payload, serialized back to back. What a log observer sees.
  bytes log_bytes() const;

  void set_trace(TraceFn fn) { trace_ = std::move(fn); }
  DeliveryMode mode() const { return mode_; }

private:
  void emit(const std::string& line);

  DeliveryMode mode_;
  bool reject_index_conflicts_;
  std::vector<Payload> log_;
  std::map<core::UserId, std::set<std::uint64_t>> delivered_;
  std::set<std::uint64_t> claimed_indices_;
  TraceFn trace_;
};

/// Idealized authenticated two-party channels carrying sender-key
/// distributions. FIFO per ordered pair; the adversary can delay and observe
/// queue lengths but never reads or reorders contents.
class TwoPartyChannels {
public:
  using TraceFn = std::function<void(const std::string&)>;

  void send(const core::SenderKeyDistribution& d);

  /// Pops the oldest distribution queued from `from` to `to`.
  Result<core::SenderKeyDistribution> deliver(const core::UserId& from,
                                              const core::UserId& to);

  /// Pops the earliest-queued distribution addressed to `to`, whatever the
  /// sender. Earliest means global enqueue order, so runs are deterministic.
  Result<core::SenderKeyDistribution> deliver_next(const core::UserId& to);

  std::size_t queue_length(const core::UserId& from,
                           const core::UserId& to) const;
  std::size_t pending_for(const core::UserId& to) const;
  std::size_t pending_total() const;

  void set_trace(TraceFn fn) { trace_ = std::move(fn); }

private:
  struct Item {
    std::uint64_t stamp;
    core::SenderKeyDistribution d;
  };
  void emit(const std::string& line);

  std::map<std::pair<core::UserId, core::UserId>, std::deque<Item>> queues_;
  std::uint64_t counter_ = 0;
  TraceFn trace_;
};

} // namespace senderkeys::transport
