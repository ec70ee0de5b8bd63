#include "senderkeys/scenario.hpp"

#include <fstream>
#include <sstream>

#include "senderkeys/encoding.hpp"
#include "senderkeys/variants.hpp"

namespace senderkeys::scenario {

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) {
    out.push_back(cur);
  }
  return out;
}

std::string strip(const std::string& line)
{
  std::string s = line;
  if (const auto hash = s.find('#'); hash != std::string::npos) {
    s.erase(hash);
  }
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool parse_u64(const std::string& s, std::uint64_t& out)
{
  if (s.empty()) {
    return false;
  }
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') {
      return false;
    }
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  out = v;
  return true;
}

struct Settings {
  core::Variant variant = core::Variant::baseline;
  std::uint64_t seed = 1;
  std::uint64_t nmax = 2000;
  std::uint64_t sig_block = 1;
  game::Predicate predicate = game::Predicate::baseline;
  std::string expect;
};

/// Collected while running; rendered into the report at the end.
struct Collector {
  std::vector<std::string> plaintexts;
  std::vector<std::pair<std::string, game::AttackReport>> attacks;
};

std::string hex_or_withheld(const std::optional<bytes>& pt)
{
  if (!pt) {
    return "withheld";
  }
  if (pt->empty()) {
    return "(empty)";
  }
  return to_hex(*pt);
}

} // namespace

RunResult run_text(const std::string& text, const Options& opts,
                   const std::string& name)
{
  RunResult rr;
  Settings s;

  // First pass: header settings, stopping at the first command line.
  std::vector<std::string> lines;
  {
    std::istringstream is(text);
    std::string raw;
    while (std::getline(is, raw)) {
      lines.push_back(strip(raw));
    }
  }
  std::size_t first_command = lines.size();
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string& line = lines[k];
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    const bool is_setting =
        eq != std::string::npos && line.find(' ') == std::string::npos;
    if (!is_setting) {
      first_command = k;
      break;
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    bool ok = true;
    if (key == "variant") {
      const auto v = core::variant_from_string(value);
      ok = v.has_value();
      if (v) {
        s.variant = *v;
      }
    } else if (key == "seed") {
      ok = parse_u64(value, s.seed);
    } else if (key == "nmax") {
      ok = parse_u64(value, s.nmax);
    } else if (key == "sig_block") {
      ok = parse_u64(value, s.sig_block);
    } else if (key == "predicate") {
      const auto p = game::predicate_from_string(value);
      ok = p.has_value();
      if (p) {
        s.predicate = *p;
      }
    } else if (key == "expect") {
      s.expect = value;
    } else {
      ok = false;
    }
    if (!ok) {
      rr.parse_ok = false;
      rr.parse_error =
          "line " + std::to_string(k + 1) + ": bad setting '" + line + "'";
      rr.exit_code = 2;
      return rr;
    }
  }

  if (opts.variant) {
    s.variant = *opts.variant;
  }
  if (opts.seed) {
    s.seed = *opts.seed;
  }
  if (opts.nmax) {
    s.nmax = *opts.nmax;
  }
  if (opts.sig_block) {
    s.sig_block = *opts.sig_block;
  }
  if (opts.predicate) {
    s.predicate = *opts.predicate;
  }
  if (opts.expect) {
    s.expect = *opts.expect;
  }

  auto g = std::make_unique<game::Game>(
      s.seed, variants::config_for(s.variant, s.nmax, s.sig_block));
  Collector col;
  std::vector<std::string> roster_order;

  const auto fail = [&](std::size_t k, const std::string& why) {
    rr.parse_ok = false;
    rr.parse_error = "line " + std::to_string(k + 1) + ": " + why;
    rr.exit_code = 2;
  };

  const auto known = [&](const std::string& id) { return g->has_user(id); };

  const auto deliver_one = [&](const std::string& to, std::uint64_t seq,
                               bool redeliver) {
    const auto out = g->o_deliver(to, seq, redeliver);
    if (out.ok && g->server().size() > seq) {
      if (const auto* f =
              std::get_if<core::Frame>(&g->server().entry(seq))) {
        col.plaintexts.push_back("deliver to=" + to +
                                 " seq=" + std::to_string(seq) +
                                 " sender=" + f->sender +
                                 " index=" + std::to_string(f->index) +
                                 " pt=" + hex_or_withheld(out.plaintext));
      }
    }
  };

  for (std::size_t k = first_command; k < lines.size() && rr.parse_ok; ++k) {
    const std::string& line = lines[k];
    if (line.empty()) {
      continue;
    }
    const auto tok = split(line, ' ');
    const std::string& cmd = tok[0];

    if (cmd == "users" && tok.size() == 2) {
      for (const auto& id : split(tok[1], ',')) {
        g->add_user(id);
        roster_order.push_back(id);
      }
    } else if (cmd == "create" && tok.size() == 3 && known(tok[1])) {
      (void)g->o_create(tok[1], split(tok[2], ','));
    } else if (cmd == "send" && tok.size() == 3 && known(tok[1])) {
      const auto m = from_hex(tok[2]);
      if (!m) {
        fail(k, "bad hex message");
        break;
      }
      (void)g->o_send(tok[1], *m);
    } else if (cmd == "challenge" && tok.size() == 4 && known(tok[1])) {
      const auto m0 = from_hex(tok[2]);
      const auto m1 = from_hex(tok[3]);
      if (!m0 || !m1) {
        fail(k, "bad hex message");
        break;
      }
      (void)g->o_challenge(tok[1], *m0, *m1);
    } else if ((cmd == "deliver" || cmd == "redeliver") && tok.size() == 3 &&
               known(tok[1])) {
      const bool redeliver = cmd == "redeliver";
      std::uint64_t seq = 0;
      if (tok[2] == "next") {
        if (const auto next = g->server().next_pending(tok[1])) {
          deliver_one(tok[1], *next, redeliver);
        }
      } else if (tok[2] == "all") {
        while (const auto next = g->server().next_pending(tok[1])) {
          deliver_one(tok[1], *next, redeliver);
        }
      } else if (parse_u64(tok[2], seq)) {
        deliver_one(tok[1], seq, redeliver);
      } else {
        fail(k, "bad sequence number");
        break;
      }
    } else if (cmd == "receive" && tok.size() == 4 && known(tok[1]) &&
               known(tok[2])) {
      const auto wire = from_hex(tok[3]);
      if (!wire) {
        fail(k, "bad hex frame");
        break;
      }
      const auto f = encoding::decode_frame(*wire);
      if (!f) {
        fail(k, "undecodable frame");
        break;
      }
      const auto out = g->o_receive(tok[1], tok[2], *f);
      if (out.ok) {
        col.plaintexts.push_back("receive to=" + tok[1] + " sender=" +
                                 tok[2] + " index=" + std::to_string(f->index) +
                                 " pt=" + hex_or_withheld(out.plaintext));
      }
    } else if (cmd == "tp_deliver" &&
               (tok.size() == 3 || tok.size() == 4) && known(tok[1]) &&
               known(tok[2])) {
      if (tok.size() == 4 && tok[3] == "all") {
        while (g->channels().queue_length(tok[1], tok[2]) > 0) {
          (void)g->tp_deliver(tok[1], tok[2]);
        }
      } else {
        (void)g->tp_deliver(tok[1], tok[2]);
      }
    } else if (cmd == "tp_deliver_all" && tok.size() == 1) {
      for (const auto& from : roster_order) {
        for (const auto& to : roster_order) {
          while (g->channels().queue_length(from, to) > 0) {
            (void)g->tp_deliver(from, to);
          }
        }
      }
    } else if (cmd == "add" && tok.size() == 3 && known(tok[1]) &&
               known(tok[2])) {
      (void)g->o_add(tok[1], tok[2]);
    } else if (cmd == "remove" && tok.size() == 3 && known(tok[1]) &&
               known(tok[2])) {
      (void)g->o_remove(tok[1], tok[2]);
    } else if (cmd == "update" && tok.size() == 2 && known(tok[1])) {
      (void)g->o_update(tok[1]);
    } else if (cmd == "expose" && tok.size() == 2 && known(tok[1])) {
      (void)g->o_expose(tok[1]);
    } else if (cmd == "expmk" && tok.size() == 3 && known(tok[1])) {
      std::uint64_t index = 0;
      if (!parse_u64(tok[2], index)) {
        fail(k, "bad index");
        break;
      }
      (void)g->o_expmk(tok[1], index);
    } else if (cmd == "rng" && tok.size() == 3 && known(tok[1])) {
      if (tok[2] == "fresh") {
        g->rng_unpin(tok[1]);
      } else {
        const auto pattern = from_hex(tok[2]);
        if (!pattern || pattern->empty()) {
          fail(k, "bad rng pattern");
          break;
        }
        g->rng_pin(tok[1], *pattern);
      }
    } else if (cmd == "attack_q1q4" && tok.size() == 3 && known(tok[1]) &&
               known(tok[2])) {
      col.attacks.emplace_back(
          "q1q4 id1=" + tok[1] + " id2=" + tok[2],
          game::attack_q1_q4(*g, tok[1], tok[2]));
    } else if (cmd == "attack_metadata" && tok.size() == 3 &&
               known(tok[1]) && known(tok[2])) {
      col.attacks.emplace_back(
          "metadata id1=" + tok[1] + " id2=" + tok[2],
          game::attack_metadata(*g, tok[1], tok[2]));
    } else if (cmd == "finalize" && tok.size() == 2) {
      int guess = 0;
      if (tok[1] == "0") {
        guess = 0;
      } else if (tok[1] == "1") {
        guess = 1;
      } else if (tok[1] == "rand") {
        bytes input;
        append_u64_be(input, s.seed);
        const auto label = to_bytes("guess");
        input.insert(input.end(), label.begin(), label.end());
        guess = crypto::sha256(input)[0] & 1;
      } else {
        fail(k, "bad guess");
        break;
      }
      rr.outcome = g->finalize(guess, s.predicate);
    } else {
      fail(k, "unknown command '" + line + "'");
      break;
    }
  }

  if (rr.exit_code == 2) {
    return rr;
  }

  rr.verdict = game::judge_cleanness(g->transcript(), s.predicate);
  for (auto& [label, attack] : col.attacks) {
    rr.attacks.push_back(attack);
  }

  std::ostringstream os;
  os << "# sender-keys lab report\n";
  os << "scenario=" << name << "\n";
  os << "variant=" << core::to_string(s.variant) << " seed=" << s.seed
     << " nmax=" << s.nmax << " sig_block=" << s.sig_block
     << " predicate=" << game::to_string(s.predicate) << "\n";
  os << "--- events ---\n";
  os << g->transcript().render();
  if (!col.plaintexts.empty()) {
    os << "--- plaintexts ---\n";
    for (const auto& line : col.plaintexts) {
      os << line << "\n";
    }
  }
  if (!col.attacks.empty()) {
    os << "--- attacks ---\n";
    for (const auto& [label, attack] : col.attacks) {
      os << "attack=" << label << " result="
         << (attack.accepted ? "ACCEPTED" : "REJECTED") << "\n";
      std::istringstream det(attack.detail);
      std::string dl;
      while (std::getline(det, dl)) {
        os << "  " << dl << "\n";
      }
    }
  }
  if (!roster_order.empty()) {
    os << "--- final ---\n";
    for (const auto& id : roster_order) {
      const auto& st = g->state(id);
      os << "user=" << id << " group=" << (st.in_group() ? "yes" : "no");
      if (st.config.single_chain()) {
        os << " shared_index="
           << (st.shared_chain ? std::to_string(st.shared_chain->index)
                               : "-");
      } else {
        os << " own_index="
           << (st.own_chain ? std::to_string(st.own_chain->index) : "-");
      }
      for (const auto& [peer, index] : st.recv_index) {
        os << " recv_" << peer << "=" << index;
      }
      os << "\n";
    }
  }
  os << "--- verdict ---\n";
  os << "predicate=" << game::to_string(s.predicate)
     << " clean=" << (rr.verdict.clean ? "yes" : "no")
     << " violations=" << rr.verdict.violations.size() << "\n";
  for (const auto& v : rr.verdict.violations) {
    os << "violation time=" << v.time << " rule=" << v.rule << "\n";
  }
  os << "--- outcome ---\n";
  os << "outcome=" << (rr.outcome ? to_string(*rr.outcome) : "none") << "\n";
  os << "--- totals ---\n";
  os << "log=" << g->server().size() << " events="
     << g->transcript().events.size()
     << " forgery=" << (g->forgery_accepted() ? "yes" : "no") << "\n";
  rr.report = os.str();

  rr.expect_value = s.expect;
  if (!s.expect.empty()) {
    bool met = false;
    if (s.expect == "win" || s.expect == "lose" || s.expect == "dirty") {
      met = rr.outcome && to_string(*rr.outcome) == s.expect;
    } else if (s.expect == "accepted" || s.expect == "rejected" ||
               s.expect == "accept" || s.expect == "reject") {
      const bool want_accept =
          s.expect == "accepted" || s.expect == "accept";
      met = !rr.attacks.empty() && rr.attacks.back().accepted == want_accept;
    } else if (s.expect == "clean" || s.expect == "unclean") {
      met = rr.verdict.clean == (s.expect == "clean");
    }
    rr.expect_ok = met;
    rr.exit_code = met ? 0 : 1;
  }
  rr.g = std::move(g);
  return rr;
}

RunResult run_file(const std::string& path, const Options& opts)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    RunResult rr;
    rr.parse_ok = false;
    rr.parse_error = "cannot open scenario file: " + path;
    rr.exit_code = 2;
    return rr;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  return run_text(buf.str(), opts, name);
}

} // namespace senderkeys::scenario

namespace senderkeys::vectors {

std::string kdf_vector_file()
{
  std::ostringstream os;
  os << "# sender-keys key-derivation vectors\n";
  os << "# kdf_mk <chain-key> <index> <message-key> <index>\n";
  os << "# kdf_ck <chain-key> <index> <next-chain-key> <next-index>\n";
  os << "# expand <message-key> <cipher-key> <iv>\n";

  std::vector<crypto::Seed32> seeds;
  crypto::Seed32 zero{};
  seeds.push_back(zero);
  crypto::Seed32 ones{};
  ones.fill(0xff);
  seeds.push_back(ones);
  for (int k = 0; k < 6; ++k) {
    seeds.push_back(
        crypto::sha256(to_bytes("sender-keys-vector-" + std::to_string(k))));
  }

  const auto hex32 = [](const std::array<std::uint8_t, 32>& a) {
    return to_hex(std::span<const std::uint8_t>(a.data(), a.size()));
  };

  for (const auto& seed : seeds) {
    crypto::ChainKey ck{seed, 0};
    for (int step = 0; step < 3; ++step) {
      const auto mk = crypto::kdf_mk(ck);
      const auto next = crypto::kdf_ck(ck);
      const auto ex = crypto::expand_mk(mk);
      os << "kdf_mk " << hex32(ck.secret) << " " << ck.index << " "
         << hex32(mk.secret) << " " << mk.index << "\n";
      os << "kdf_ck " << hex32(ck.secret) << " " << ck.index << " "
         << hex32(next.secret) << " " << next.index << "\n";
      os << "expand " << hex32(mk.secret) << " " << hex32(ex.enc_key) << " "
         << to_hex(std::span<const std::uint8_t>(ex.iv.data(), ex.iv.size()))
         << "\n";
      ck = next;
    }
  }
  return os.str();
}

} // namespace senderkeys::vectors
