#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "senderkeys/game.hpp"

namespace senderkeys::scenario {

/// Command-line overrides; anything set here wins over the scenario header.
struct Options {
  std::optional<core::Variant> variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> nmax;
  std::optional<std::uint64_t> sig_block;
  std::optional<game::Predicate> predicate;
  std::optional<std::string> expect;
};

struct RunResult {
  bool parse_ok = true;
  std::string parse_error;
  std::string report; // deterministic text, byte-reproducible per seed
  std::optional<game::Outcome> outcome;
  game::CleannessVerdict verdict;
  std::vector<game::AttackReport> attacks;
  std::string expect_value;
  bool expect_ok = true;
  int exit_code = 0; // 0 ok / expectation met, 1 expectation failed, 2 parse error
  std::unique_ptr<game::Game> g; // final game, for in-process inspection
};

/// Runs a scenario given as text. Line-oriented format:
///
///   header lines `key=value` (variant, seed, nmax, sig_block, predicate,
///   expect) before the first command; `#` starts a comment; commands are
///   whitespace-separated with hex message bodies:
///
///   users A,B,C          create A A,B,C        send A <hex>
///   challenge A <hex> <hex>                    deliver B <seq|next|all>
///   redeliver B <seq>    receive B A <framehex>
///   tp_deliver A B [all] tp_deliver_all        add A D
///   remove A C           update A              expose A
///   expmk A <index>      rng A <hex|fresh>     finalize <0|1|rand>
///   attack_q1q4 A B      attack_metadata A B
RunResult run_text(const std::string& text, const Options& opts,
                   const std::string& name = "-");

RunResult run_file(const std::string& path, const Options& opts);

} // namespace senderkeys::scenario

namespace senderkeys::vectors {

/// Deterministic key-derivation vector file: chain-key to message-key and
/// chain-key to next-chain-key derivations plus message-key expansion, over
/// fixed seeds (all-zero, all-ones and hashed labels).
std::string kdf_vector_file();

} // namespace senderkeys::vectors
