// sklab: command-line front end for the sender-keys laboratory.
//
//   sklab run <scenario.scn> [--variant v] [--seed n] [--nmax n]
//             [--sig-block n] [--predicate p] [--expect e] [--report path]
//             [--quiet]
//   sklab vectors [--out path]
//
// Exit codes for `run`: 0 success / expectation met, 1 expectation failed,
// 2 parse or I/O error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "senderkeys/scenario.hpp"

namespace {

int run_scenario(const std::string& path,
                 const senderkeys::scenario::Options& opts,
                 const std::string& report_path, bool quiet)
{
  auto rr = senderkeys::scenario::run_file(path, opts);
  if (!rr.parse_ok) {
    std::cerr << "error: " << rr.parse_error << "\n";
    return 2;
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write report to " << report_path << "\n";
      return 2;
    }
    out << rr.report;
  }
  if (!quiet) {
    std::cout << rr.report;
  }
  if (!rr.expect_value.empty() && !quiet) {
    std::cout << "expect=" << rr.expect_value << " "
              << (rr.expect_ok ? "met" : "NOT MET") << "\n";
  }
  return rr.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"sender-keys group messaging laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario file");
  std::string scenario_path;
  run->add_option("scenario", scenario_path, "scenario file")->required();
  std::string variant_name;
  run->add_option("--variant", variant_name,
                  "baseline | sig-ratchet | hardened-rand | single-chain | "
                  "combined");
  std::uint64_t seed = 0;
  auto* seed_opt = run->add_option("--seed", seed, "run seed")
                       ->envname("SENDERKEYS_SEED");
  std::uint64_t nmax = 0;
  auto* nmax_opt =
      run->add_option("--nmax", nmax, "skipped-key capacity per sender");
  std::uint64_t sig_block = 0;
  auto* block_opt = run->add_option("--sig-block", sig_block,
                                    "messages per signature generation");
  std::string predicate_name;
  run->add_option("--predicate", predicate_name,
                  "baseline | strengthened | per-sender");
  std::string expect;
  run->add_option("--expect", expect,
                  "win | lose | dirty | accepted | rejected | clean | unclean");
  std::string report_path;
  run->add_option("--report", report_path, "write the report to this file");
  bool quiet = false;
  run->add_flag("--quiet", quiet, "suppress stdout");

  auto* vectors = app.add_subcommand(
      "vectors", "print the key-derivation vector file");
  std::string vectors_out;
  vectors->add_option("--out", vectors_out, "write to this file");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(vectors)) {
    const std::string text = senderkeys::vectors::kdf_vector_file();
    if (!vectors_out.empty()) {
      std::ofstream out(vectors_out, std::ios::binary);
      if (!out) {
        std::cerr << "error: cannot write " << vectors_out << "\n";
        return 2;
      }
      out << text;
    } else {
      std::cout << text;
    }
    return 0;
  }

  senderkeys::scenario::Options opts;
  if (!variant_name.empty()) {
    const auto v = senderkeys::core::variant_from_string(variant_name);
    if (!v) {
      std::cerr << "error: unknown variant '" << variant_name << "'\n";
      return 2;
    }
    opts.variant = v;
  }
  if (seed_opt->count() > 0) {
    opts.seed = seed;
  }
  if (nmax_opt->count() > 0) {
    opts.nmax = nmax;
  }
  if (block_opt->count() > 0) {
    opts.sig_block = sig_block;
  }
  if (!predicate_name.empty()) {
    const auto p = senderkeys::game::predicate_from_string(predicate_name);
    if (!p) {
      std::cerr << "error: unknown predicate '" << predicate_name << "'\n";
      return 2;
    }
    opts.predicate = p;
  }
  if (!expect.empty()) {
    opts.expect = expect;
  }
  return run_scenario(scenario_path, opts, report_path, quiet);
}
