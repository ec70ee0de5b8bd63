#include "senderkeys/result.hpp"

namespace senderkeys {

std::string to_string(Error e)
{
  switch (e) {
    case Error::no_group:
      return "no-group";
    case Error::group_exists:
      return "group-exists";
    case Error::not_a_member:
      return "not-a-member";
    case Error::already_member:
      return "already-member";
    case Error::self_remove:
      return "self-remove";
    case Error::creator_not_in_members:
      return "creator-not-in-members";
    case Error::signature_invalid:
      return "signature-invalid";
    case Error::pending_sender_key:
      return "pending-sender-key";
    case Error::skipped_key_missing:
      return "skipped-key-missing";
    case Error::skipped_capacity_exceeded:
      return "skipped-capacity-exceeded";
    case Error::decryption_failure:
      return "decryption-failure";
    case Error::stale_spk:
      return "stale-spk";
    case Error::unknown_control:
      return "unknown-control";
    case Error::actor_not_member:
      return "actor-not-member";
    case Error::duplicate_control:
      return "duplicate-control";
    case Error::wrong_recipient:
      return "wrong-recipient";
    case Error::unknown_seq:
      return "unknown-seq";
    case Error::already_delivered:
      return "already-delivered";
    case Error::empty_channel:
      return "empty-channel";
    case Error::index_conflict:
      return "index-conflict";
    case Error::unknown_user:
      return "unknown-user";
    case Error::length_mismatch:
      return "length-mismatch";
    case Error::key_unavailable:
      return "key-unavailable";
    case Error::bad_argument:
      return "bad-argument";
  }
  return "unknown-error";
}

} // namespace senderkeys
