#include "sdbt/rules.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace sdbt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

std::optional<std::int32_t> parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, 0);
    if (used != s.size()) return std::nullopt;
    return static_cast<std::int32_t>(v);
  } catch (...) {
    return std::nullopt;
  }
}

const std::vector<std::pair<std::string, Condition>>& cond_names() {
  static const std::vector<std::pair<std::string, Condition>> v{
      {"eq", Condition::EQ}, {"ne", Condition::NE}, {"ge", Condition::GE}, {"lt", Condition::LT}};
  return v;
}

bool is_reg_placeholder(const std::string& s) { return s == "%Rd" || s == "%Rn" || s == "%Rm"; }

class RuleParser {
 public:
  explicit RuleParser(const std::string& text) : in_(text) {}

  RuleSet run() {
    RuleSet set;
    std::string raw;
    TranslationRule* cur = nullptr;
    std::set<std::string> names;
    while (std::getline(in_, raw)) {
      ++line_;
      // '#' also prefixes immediates, so only whole-line comments exist.
      std::string l = trim(raw);
      if (l.empty() || l[0] == '#') continue;
      if (starts_with(l, "rule ")) {
        if (cur) finish(*cur);
        std::istringstream ls(l.substr(5));
        TranslationRule r;
        r.line = line_;
        ls >> r.name;
        std::string flag;
        if (ls >> flag) {
          if (flag != "constrained") fail("unknown rule attribute '" + flag + "'");
          r.constrained = true;
        }
        if (r.name.empty()) fail("rule needs a name");
        if (!names.insert(r.name).second) fail("duplicate rule name '" + r.name + "'");
        set.rules.push_back(std::move(r));
        cur = &set.rules.back();
      } else if (starts_with(l, "guest:")) {
        if (!cur) fail("guest line outside a rule");
        if (!cur->host.empty()) fail("guest lines must precede host lines");
        cur->guest.push_back(guest_pattern(trim(l.substr(6))));
      } else if (starts_with(l, "host:")) {
        if (!cur) fail("host line outside a rule");
        cur->host.push_back(host_template(trim(l.substr(5))));
      } else {
        fail("expected 'rule', 'guest:' or 'host:'");
      }
    }
    if (cur) finish(*cur);
    return set;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw RuleError(line_, msg); }

  GuestPattern guest_pattern(const std::string& text) {
    GuestPattern p;
    std::size_t sp = text.find_first_of(" \t");
    std::string mn = text.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : trim(text.substr(sp));
    if (starts_with(mn, "%aluop")) {
      mn = mn.substr(6);
    } else {
      bool found = false;
      // Longest base name first so that "bl" is not read as "b" + "l".
      std::size_t best = 0;
      for (int k = 0; k <= static_cast<int>(Mnemonic::Halt); ++k) {
        auto op = static_cast<Mnemonic>(k);
        std::string name(mnemonic_name(op));
        if (starts_with(mn, name) && name.size() > best) {
          best = name.size();
          p.op = op;
          found = true;
        }
      }
      if (!found) fail("unknown mnemonic in pattern '" + mn + "'");
      mn = mn.substr(best);
      if (!is_alu(*p.op) && *p.op != Mnemonic::Cmp) fail("patterns cover ALU and cmp only");
    }
    if (starts_with(mn, "%cond")) {
      p.any_cond = true;
      mn = mn.substr(5);
    }
    if (mn == "s") {
      p.sets_flags = true;
      mn.clear();
    }
    if (!mn.empty()) fail("bad pattern mnemonic suffix '" + mn + "'");
    if (p.op == Mnemonic::Cmp) p.sets_flags = true;
    for (const auto& o : split_commas(rest)) {
      PatternOperand po;
      if (starts_with(o, "#")) {
        po.is_reg = false;
        std::string v = o.substr(1);
        if (v == "%imm") {
          po.placeholder = v;
        } else if (auto n = parse_int(v)) {
          po.value = *n;
        } else {
          fail("bad immediate operand '" + o + "'");
        }
      } else if (is_reg_placeholder(o)) {
        po.placeholder = o;
      } else if (o.size() >= 2 && o[0] == 'r' && parse_int(o.substr(1))) {
        po.value = *parse_int(o.substr(1));
        if (po.value < 0 || po.value >= kNumGuestRegs) fail("bad register '" + o + "'");
      } else {
        fail("bad operand '" + o + "'");
      }
      p.operands.push_back(po);
    }
    std::size_t want = !p.op ? 3 : (*p.op == Mnemonic::Mov || *p.op == Mnemonic::Mvn || *p.op == Mnemonic::Cmp) ? 2 : 3;
    if (p.operands.size() != want) fail("wrong operand count in guest pattern");
    if (!p.operands[0].is_reg || (want == 3 && !p.operands[1].is_reg)) fail("register operand expected");
    return p;
  }

  HostTemplate host_template(const std::string& text) {
    HostTemplate t;
    std::size_t sp = text.find_first_of(" \t");
    std::string mn = text.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : trim(text.substr(sp));
    if (mn.size() > 2 && mn.substr(mn.size() - 2) == ".f") {
      t.set_flags = true;
      mn = mn.substr(0, mn.size() - 2);
    }
    static const std::vector<std::pair<std::string, HostOp>> kOps{
        {"hmov", HostOp::Mov}, {"hadd", HostOp::Add}, {"hsub", HostOp::Sub}, {"hand", HostOp::And},
        {"hor", HostOp::Or},   {"hxor", HostOp::Xor}, {"hshl", HostOp::Shl}, {"hshr", HostOp::Shr},
        {"hcmp", HostOp::Cmp}, {"hjcc", HostOp::Jcc}, {"hflagext", HostOp::FlagExt}};
    if (mn == "h%aluop") {
      t.op_from_aluop = true;
      t.op = HostOp::Add;
    } else {
      bool found = false;
      for (const auto& [name, op] : kOps) {
        if (name == mn) {
          t.op = op;
          found = true;
        }
      }
      if (!found) fail("host mnemonic not allowed in a template: '" + mn + "'");
    }
    if (t.op == HostOp::Cmp) t.set_flags = true;
    for (const auto& o : split_commas(rest)) t.operands.push_back(template_operand(o));
    std::size_t want = 3;
    if (t.op == HostOp::Mov || t.op == HostOp::Cmp || t.op == HostOp::Jcc || t.op == HostOp::FlagExt) want = 2;
    if (t.operands.size() != want) fail("wrong operand count in host template");
    return t;
  }

  TemplateOperand template_operand(const std::string& o) {
    TemplateOperand t;
    if (o == "@end") {
      t.kind = TemplateOperand::Kind::End;
    } else if (o == "%cond") {
      t.kind = TemplateOperand::Kind::Cond;
      t.placeholder = o;
    } else if (is_reg_placeholder(o)) {
      t.placeholder = o;
    } else if (starts_with(o, "#")) {
      t.kind = TemplateOperand::Kind::Imm;
      std::string v = o.substr(1);
      if (v == "%imm") {
        t.placeholder = v;
      } else if (auto n = parse_int(v)) {
        t.value = *n;
      } else {
        fail("bad immediate '" + o + "'");
      }
    } else if (o.size() >= 2 && o[0] == 'h' && parse_int(o.substr(1))) {
      t.value = *parse_int(o.substr(1));
      if (t.value < 0 || t.value >= kNumHostRegs) fail("bad host register '" + o + "'");
    } else if (o == "N" || o == "Z" || o == "C" || o == "V") {
      t.kind = TemplateOperand::Kind::Flag;
      t.value = o == "N" ? kFlagN : o == "Z" ? kFlagZ : o == "C" ? kFlagC : kFlagV;
    } else {
      bool found = false;
      for (const auto& [name, c] : cond_names()) {
        if (name == o) {
          t.kind = TemplateOperand::Kind::Cond;
          t.cond = c;
          found = true;
        }
      }
      if (!found) fail("bad template operand '" + o + "'");
    }
    return t;
  }

  void finish(TranslationRule& r) {
    int saved = line_;
    line_ = r.line;
    if (r.guest.empty() || r.host.empty()) fail("rule '" + r.name + "' needs guest and host lines");
    std::set<std::string> bound;
    bool any_aluop = false, any_cond = false;
    for (const auto& g : r.guest) {
      for (const auto& o : g.operands)
        if (!o.placeholder.empty()) bound.insert(o.placeholder);
      any_aluop |= !g.op.has_value();
      any_cond |= g.any_cond;
    }
    for (const auto& h : r.host) {
      if (h.op_from_aluop && !any_aluop) fail("h%aluop without a %aluop guest pattern");
      for (const auto& o : h.operands) {
        if (o.kind == TemplateOperand::Kind::Cond && !o.placeholder.empty() && !any_cond)
          fail("%cond used but not bound");
        if ((o.kind == TemplateOperand::Kind::Reg || o.kind == TemplateOperand::Kind::Imm) &&
            !o.placeholder.empty() && !bound.count(o.placeholder))
          fail("placeholder " + o.placeholder + " is not bound by the guest pattern");
      }
    }
    // A template needs the constrained treatment when it writes host flags
    // that do not stand for the guest's own flag result.
    bool guest_flags = r.guest.back().sets_flags;
    int writers = 0;
    for (const auto& h : r.host) writers += h.set_flags ? 1 : 0;
    bool needs = guest_flags ? writers != 1 : writers != 0;
    if (needs != r.constrained)
      fail("rule '" + r.name + "': constrained attribute does not match its template");
    if (any_cond && !r.constrained) fail("conditional patterns must use a constrained template");
    line_ = saved;
  }

  std::istringstream in_;
  int line_ = 0;
};

struct Operand {
  bool is_reg;
  std::int32_t value;
};

std::vector<Operand> operands_of(const GuestInstr& g) {
  Operand src2{!g.has_imm, g.has_imm ? g.imm : g.rm};
  switch (g.op) {
    case Mnemonic::Mov:
    case Mnemonic::Mvn:
      return {{true, g.rd}, src2};
    case Mnemonic::Cmp:
      return {{true, g.rn}, src2};
    default:
      if (is_alu(g.op)) return {{true, g.rd}, {true, g.rn}, src2};
      return {};
  }
}

bool three_operand_alu(Mnemonic op) { return is_alu(op) && op != Mnemonic::Mov && op != Mnemonic::Mvn; }

bool match_one(const GuestPattern& p, const GuestInstr& g, Binding& b, bool first) {
  if (p.op) {
    if (*p.op != g.op) return false;
  } else {
    if (!three_operand_alu(g.op)) return false;
    if (!first && b.aluop != g.op) return false;
    b.aluop = g.op;
  }
  if (p.any_cond) {
    if (g.cond == Condition::AL) return false;
    if (!first && b.cond != g.cond) return false;
    b.cond = g.cond;
  } else if (g.cond != Condition::AL) {
    return false;
  }
  if (p.sets_flags != g.sets_flags) return false;
  auto ops = operands_of(g);
  if (ops.size() != p.operands.size()) return false;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto& po = p.operands[k];
    if (po.is_reg != ops[k].is_reg) return false;
    if (po.placeholder.empty()) {
      if (po.value != ops[k].value) return false;
      continue;
    }
    auto [it, inserted] = b.values.emplace(po.placeholder, ops[k].value);
    if (!inserted && it->second != ops[k].value) return false;
  }
  return true;
}

}  // namespace

RuleSet parse_rules(const std::string& text) { return RuleParser(text).run(); }

RuleSet load_rules(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw RuleError(0, "cannot open rule file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_rules(ss.str());
}

std::optional<Binding> match_rule(std::span<const GuestInstr> instrs, const RuleSet& rules) {
  std::optional<Binding> best;
  for (const auto& r : rules.rules) {
    if (r.guest.size() > instrs.size()) continue;
    if (best && static_cast<int>(r.guest.size()) <= best->span) continue;
    Binding b;
    b.rule = &r;
    b.span = static_cast<int>(r.guest.size());
    bool ok = true;
    for (std::size_t k = 0; k < r.guest.size() && ok; ++k) {
      ok = match_one(r.guest[k], instrs[k], b, k == 0);
      // Only the final instruction of a sequence may be a block terminator or
      // touch flags the sequence does not produce; keep sequences ALU-only.
      if (ok && r.guest.size() > 1) {
        auto du = reg_def_use(instrs[k]);
        if ((du.defs | du.uses) & ~kResidentMask) ok = false;
      }
    }
    if (ok) best = std::move(b);
  }
  return best;
}

HostOp host_op_for(Mnemonic alu) {
  switch (alu) {
    case Mnemonic::Mov: return HostOp::Mov;
    case Mnemonic::Add: return HostOp::Add;
    case Mnemonic::Sub: return HostOp::Sub;
    case Mnemonic::And: return HostOp::And;
    case Mnemonic::Orr: return HostOp::Or;
    case Mnemonic::Eor: return HostOp::Xor;
    case Mnemonic::Lsl: return HostOp::Shl;
    case Mnemonic::Lsr: return HostOp::Shr;
    case Mnemonic::Cmp: return HostOp::Cmp;
    default: throw std::invalid_argument("host_op_for: no direct host op");
  }
}

std::vector<HostInstr> instantiate(const Binding& b) {
  std::vector<HostInstr> out;
  auto val = [&](const TemplateOperand& o) -> std::int32_t {
    if (o.placeholder.empty()) return o.value;
    return static_cast<std::int32_t>(b.values.at(o.placeholder));
  };
  for (const auto& t : b.rule->host) {
    HostInstr i;
    i.op = t.op_from_aluop ? host_op_for(b.aluop) : t.op;
    i.set_flags = t.set_flags;
    const auto& ops = t.operands;
    switch (i.op) {
      case HostOp::Jcc:
        i.cond = ops[0].placeholder.empty() ? ops[0].cond : b.cond;
        i.target = ops[1].kind == TemplateOperand::Kind::End ? kTemplateEnd : val(ops[1]);
        break;
      case HostOp::FlagExt:
        i.dst = static_cast<std::uint8_t>(val(ops[0]));
        if (ops[1].kind == TemplateOperand::Kind::Flag) {
          i.flag = static_cast<FlagSet>(ops[1].value);
        } else {
          i.cond = ops[1].placeholder.empty() ? ops[1].cond : b.cond;
        }
        break;
      case HostOp::Cmp:
      case HostOp::Mov: {
        const auto& src = ops[1];
        if (i.op == HostOp::Cmp) {
          i.a = static_cast<std::uint8_t>(val(ops[0]));
        } else {
          i.dst = static_cast<std::uint8_t>(val(ops[0]));
        }
        if (src.kind == TemplateOperand::Kind::Imm) {
          i.b_imm = true;
          i.imm = val(src);
        } else {
          i.b = static_cast<std::uint8_t>(val(src));
        }
        break;
      }
      default:
        i.dst = static_cast<std::uint8_t>(val(ops[0]));
        i.a = static_cast<std::uint8_t>(val(ops[1]));
        if (ops[2].kind == TemplateOperand::Kind::Imm) {
          i.b_imm = true;
          i.imm = val(ops[2]);
        } else {
          i.b = static_cast<std::uint8_t>(val(ops[2]));
        }
        break;
    }
    out.push_back(i);
  }
  return out;
}

}  // namespace sdbt
