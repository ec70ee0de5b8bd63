#pragma once

#include <cassert>
#include <string>
#include <utility>
#include <variant>

namespace senderkeys {

/// Protocol-level failure codes. Every operation that can fail returns one of
/// these through Result; the input state is left untouched on failure.
enum class Error {
  // state machine preconditions
  no_group,
  group_exists,
  not_a_member,
  already_member,
  self_remove,
  creator_not_in_members,
  // recv outcomes
  signature_invalid,
  pending_sender_key,
  skipped_key_missing,
  skipped_capacity_exceeded,
  decryption_failure,
  stale_spk,
  // control / distribution processing
  unknown_control,
  actor_not_member,
  duplicate_control,
  wrong_recipient,
  // transport
  unknown_seq,
  already_delivered,
  empty_channel,
  index_conflict,
  // game / misc
  unknown_user,
  length_mismatch,
  key_unavailable,
  bad_argument,
};

std::string to_string(Error e);

template <typename T>
class Result {
public:
  Result(T value) : inner_(std::move(value)) {}
  Result(Error error) : inner_(error) {}

  bool ok() const { return std::holds_alternative<T>(inner_); }
  explicit operator bool() const { return ok(); }

  const T& value() const
  {
    assert(ok());
    return std::get<T>(inner_);
  }
  T& value()
  {
    assert(ok());
    return std::get<T>(inner_);
  }
  T take() { return std::move(std::get<T>(inner_)); }

  Error error() const
  {
    assert(!ok());
    return std::get<Error>(inner_);
  }

private:
  std::variant<T, Error> inner_;
};

} // namespace senderkeys
