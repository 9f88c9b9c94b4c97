#include "sdbt/guest_isa.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>
#include <vector>

namespace sdbt {

namespace {

constexpr std::array<std::pair<Mnemonic, std::string_view>, 22> kMnemonics{{
    {Mnemonic::Mov, "mov"},         {Mnemonic::Mvn, "mvn"},
    {Mnemonic::Add, "add"},         {Mnemonic::Sub, "sub"},
    {Mnemonic::And, "and"},         {Mnemonic::Orr, "orr"},
    {Mnemonic::Eor, "eor"},         {Mnemonic::Lsl, "lsl"},
    {Mnemonic::Lsr, "lsr"},         {Mnemonic::Cmp, "cmp"},
    {Mnemonic::Ldr, "ldr"},         {Mnemonic::Str, "str"},
    {Mnemonic::B, "b"},             {Mnemonic::Bl, "bl"},
    {Mnemonic::Bx, "bx"},           {Mnemonic::Vmsr, "vmsr"},
    {Mnemonic::Vmrs, "vmrs"},       {Mnemonic::Setcpsr, "setcpsr"},
    {Mnemonic::Getcpsr, "getcpsr"}, {Mnemonic::Tlbi, "tlbi"},
    {Mnemonic::Svc, "svc"},         {Mnemonic::Halt, "halt"},
}};

constexpr std::array<std::pair<Condition, std::string_view>, 5> kConditions{{
    {Condition::EQ, "eq"}, {Condition::NE, "ne"}, {Condition::GE, "ge"},
    {Condition::LT, "lt"}, {Condition::AL, "al"},
}};

constexpr std::array<std::string_view, kNumSysRegs> kSysRegNames{
    "fpscr", "fpexc", "elr", "spsr", "far", "ttbr", "scratch0", "scratch1"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool cond_allowed(Mnemonic op) {
  return is_alu(op) || op == Mnemonic::Cmp || op == Mnemonic::B || op == Mnemonic::Bl ||
         op == Mnemonic::Bx;
}

bool s_allowed(Mnemonic op) { return is_alu(op); }

struct Decoded {
  Mnemonic op;
  Condition cond;
  bool s;
};

// Splits a mnemonic token into base + condition + `s`, rejecting ambiguity.
std::optional<Decoded> decompose(const std::string& token) {
  std::vector<Decoded> found;
  for (auto [op, name] : kMnemonics) {
    if (token.rfind(name, 0) != 0) continue;
    std::string_view rest = std::string_view(token).substr(name.size());
    Condition cond = Condition::AL;
    bool explicit_cond = false;
    for (auto [c, cname] : kConditions) {
      if (rest.rfind(cname, 0) == 0) {
        cond = c;
        rest.remove_prefix(cname.size());
        explicit_cond = true;
        break;
      }
    }
    bool s = false;
    if (rest == "s") {
      s = true;
      rest = {};
    }
    if (!rest.empty()) continue;
    if (explicit_cond && cond != Condition::AL && !cond_allowed(op)) continue;
    if (s && !s_allowed(op)) continue;
    found.push_back({op, cond, s});
  }
  if (found.size() != 1) return std::nullopt;
  return found.front();
}

std::optional<std::int64_t> parse_number(std::string_view s) {
  s = trim(s);
  bool neg = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v > 0xFFFFFFFFull) return std::nullopt;
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.emplace_back(trim(cur));
  return out;
}

struct PendingInstr {
  GuestInstr instr;
  std::string label;  // unresolved branch target
  int line = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  GuestProgram run() {
    std::istringstream in{std::string(text_)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      line_ = line;
      std::string_view s = raw;
      if (auto semi = s.find(';'); semi != std::string_view::npos) s = s.substr(0, semi);
      s = trim(s);
      while (!s.empty()) {
        auto colon = s.find(':');
        if (colon == std::string_view::npos) break;
        std::string_view name = trim(s.substr(0, colon));
        if (!is_identifier(name)) break;
        define_label(std::string(name));
        s = trim(s.substr(colon + 1));
      }
      if (s.empty()) continue;
      if (s.front() == '.') {
        directive(s);
      } else {
        instruction(s);
      }
    }
    return finish();
  }

 private:
  [[noreturn]] void fail(AsmError::Kind kind, const std::string& msg) const {
    throw AsmError(kind, line_, msg);
  }

  static bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
  }

  void define_label(const std::string& name) {
    if (labels_.contains(name)) fail(AsmError::Kind::Syntax, "duplicate label '" + name + "'");
    labels_[name] = loc_;
  }

  std::uint32_t number_or_fail(std::string_view s) {
    auto v = parse_number(s);
    if (!v) fail(AsmError::Kind::Syntax, "bad number '" + std::string(s) + "'");
    return static_cast<std::uint32_t>(*v);
  }

  void directive(std::string_view s) {
    auto sp = s.find_first_of(" \t");
    std::string name = lower(s.substr(0, sp));
    std::string_view arg = sp == std::string_view::npos ? std::string_view{} : trim(s.substr(sp));
    if (name == ".org") {
      loc_ = number_or_fail(arg);
      if (loc_ % 4 != 0) fail(AsmError::Kind::Syntax, ".org must be 4-aligned");
    } else if (name == ".word") {
      data_[loc_] = number_or_fail(arg);
      loc_ += 4;
    } else if (name == ".entry") {
      entry_text_ = std::string(arg);
      entry_line_ = line_;
    } else {
      fail(AsmError::Kind::Syntax, "unknown directive " + name);
    }
  }

  std::uint8_t reg(std::string_view s) {
    std::string t = lower(trim(s));
    if (t == "lr") return kLinkReg;
    if (t.size() >= 2 && t[0] == 'r') {
      auto v = parse_number(std::string_view(t).substr(1));
      if (v && *v >= 0 && *v < kNumGuestRegs && t.substr(1).find_first_not_of("0123456789") == std::string::npos)
        return static_cast<std::uint8_t>(*v);
    }
    fail(AsmError::Kind::Syntax, "expected register, got '" + std::string(s) + "'");
  }

  std::int32_t immediate(std::string_view s) {
    s = trim(s);
    if (s.empty() || s.front() != '#') fail(AsmError::Kind::Syntax, "expected #immediate");
    auto v = parse_number(s.substr(1));
    if (!v || *v < -0x80000000ll) fail(AsmError::Kind::Syntax, "bad immediate");
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(*v));
  }

  void reg_or_imm(GuestInstr& g, std::string_view s) {
    if (!trim(s).empty() && trim(s).front() == '#') {
      g.has_imm = true;
      g.imm = immediate(s);
    } else {
      g.rm = reg(s);
    }
  }

  void expect_count(const std::vector<std::string>& ops, std::size_t n) {
    if (ops.size() != n)
      fail(AsmError::Kind::Syntax, "expected " + std::to_string(n) + " operands");
  }

  void instruction(std::string_view s) {
    auto sp = s.find_first_of(" \t");
    std::string token = lower(s.substr(0, sp));
    std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(s.substr(sp));
    auto dec = decompose(token);
    if (!dec) fail(AsmError::Kind::UnknownMnemonic, "unknown mnemonic '" + token + "'");
    PendingInstr p;
    p.line = line_;
    GuestInstr& g = p.instr;
    g.addr = loc_;
    g.op = dec->op;
    g.cond = dec->cond;
    g.sets_flags = dec->s || dec->op == Mnemonic::Cmp;
    auto ops = split_operands(rest);
    switch (g.op) {
      case Mnemonic::Mov:
      case Mnemonic::Mvn:
        expect_count(ops, 2);
        g.rd = reg(ops[0]);
        reg_or_imm(g, ops[1]);
        break;
      case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Orr:
      case Mnemonic::Eor: case Mnemonic::Lsl: case Mnemonic::Lsr:
        expect_count(ops, 3);
        g.rd = reg(ops[0]);
        g.rn = reg(ops[1]);
        reg_or_imm(g, ops[2]);
        break;
      case Mnemonic::Cmp:
        expect_count(ops, 2);
        g.rn = reg(ops[0]);
        reg_or_imm(g, ops[1]);
        break;
      case Mnemonic::Ldr:
      case Mnemonic::Str: {
        expect_count(ops, 2);
        g.rd = reg(ops[0]);
        std::string_view m = trim(ops[1]);
        if (m.size() < 2 || m.front() != '[' || m.back() != ']')
          fail(AsmError::Kind::Syntax, "expected [rn, #offset]");
        auto inner = split_operands(m.substr(1, m.size() - 2));
        if (inner.empty() || inner.size() > 2) fail(AsmError::Kind::Syntax, "bad memory operand");
        g.rn = reg(inner[0]);
        g.has_imm = true;
        g.imm = inner.size() == 2 ? immediate(inner[1]) : 0;
        break;
      }
      case Mnemonic::B:
      case Mnemonic::Bl: {
        expect_count(ops, 1);
        if (auto v = parse_number(ops[0])) {
          g.target = static_cast<std::uint32_t>(*v);
        } else if (is_identifier(ops[0])) {
          p.label = ops[0];
        } else {
          fail(AsmError::Kind::Syntax, "bad branch target");
        }
        break;
      }
      case Mnemonic::Bx:
        expect_count(ops, 1);
        g.rn = reg(ops[0]);
        break;
      case Mnemonic::Vmsr: {
        expect_count(ops, 2);
        auto sr = parse_sysreg(lower(ops[0]));
        if (!sr) fail(AsmError::Kind::Syntax, "unknown system register");
        g.sysreg = *sr;
        g.rn = reg(ops[1]);
        break;
      }
      case Mnemonic::Vmrs: {
        expect_count(ops, 2);
        g.rd = reg(ops[0]);
        auto sr = parse_sysreg(lower(ops[1]));
        if (!sr) fail(AsmError::Kind::Syntax, "unknown system register");
        g.sysreg = *sr;
        break;
      }
      case Mnemonic::Setcpsr:
        expect_count(ops, 1);
        g.rn = reg(ops[0]);
        break;
      case Mnemonic::Getcpsr:
        expect_count(ops, 1);
        g.rd = reg(ops[0]);
        break;
      case Mnemonic::Svc:
        expect_count(ops, 1);
        g.has_imm = true;
        g.imm = immediate(ops[0]);
        break;
      case Mnemonic::Tlbi:
      case Mnemonic::Halt:
        if (!ops.empty()) fail(AsmError::Kind::Syntax, "unexpected operands");
        break;
    }
    if (pending_.contains(loc_) || data_.contains(loc_))
      fail(AsmError::Kind::Syntax, "address already occupied");
    if (!first_instr_) first_instr_ = loc_;
    pending_[loc_] = std::move(p);
    loc_ += 4;
  }

  GuestProgram finish() {
    GuestProgram prog;
    prog.data = data_;
    for (auto& [addr, p] : pending_) {
      if (data_.contains(addr)) {
        line_ = p.line;
        fail(AsmError::Kind::Syntax, "instruction overlaps data");
      }
      if (!p.label.empty()) {
        auto it = labels_.find(p.label);
        if (it == labels_.end()) {
          line_ = p.line;
          fail(AsmError::Kind::UnresolvedLabel, "unresolved label '" + p.label + "'");
        }
        p.instr.target = it->second;
      }
      prog.instrs[addr] = p.instr;
    }
    if (entry_text_) {
      line_ = entry_line_;
      if (auto v = parse_number(*entry_text_)) {
        prog.entry = static_cast<std::uint32_t>(*v);
      } else if (auto it = labels_.find(*entry_text_); it != labels_.end()) {
        prog.entry = it->second;
      } else {
        fail(AsmError::Kind::UnresolvedLabel, "unresolved entry '" + *entry_text_ + "'");
      }
    } else if (first_instr_) {
      prog.entry = *first_instr_;
    }
    return prog;
  }

  std::string_view text_;
  int line_ = 0;
  std::uint32_t loc_ = 0;
  std::map<std::string, std::uint32_t> labels_;
  std::map<std::uint32_t, PendingInstr> pending_;
  std::map<std::uint32_t, std::uint32_t> data_;
  std::optional<std::string> entry_text_;
  int entry_line_ = 0;
  // Entry defaults to the first instruction in source order.
  std::optional<std::uint32_t> first_instr_;
};

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string reg_name(int r) { return "r" + std::to_string(r); }

std::string imm_text(std::int32_t v) { return "#" + std::to_string(v); }

}  // namespace

AsmError::AsmError(Kind kind, int line, const std::string& msg)
    : std::runtime_error("line " + std::to_string(line) + ": " + msg), kind_(kind), line_(line) {}

GuestProgram parse_guest_asm(std::string_view text) { return Parser(text).run(); }

std::string print_instr(const GuestInstr& g) {
  std::string m(mnemonic_name(g.op));
  if (g.cond != Condition::AL) m += condition_name(g.cond);
  if (g.sets_flags && g.op != Mnemonic::Cmp) m += "s";
  auto second = [&] { return g.has_imm ? imm_text(g.imm) : reg_name(g.rm); };
  switch (g.op) {
    case Mnemonic::Mov:
    case Mnemonic::Mvn:
      return m + " " + reg_name(g.rd) + ", " + second();
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Orr:
    case Mnemonic::Eor: case Mnemonic::Lsl: case Mnemonic::Lsr:
      return m + " " + reg_name(g.rd) + ", " + reg_name(g.rn) + ", " + second();
    case Mnemonic::Cmp:
      return m + " " + reg_name(g.rn) + ", " + second();
    case Mnemonic::Ldr:
    case Mnemonic::Str:
      return m + " " + reg_name(g.rd) + ", [" + reg_name(g.rn) + ", " + imm_text(g.imm) + "]";
    case Mnemonic::B:
    case Mnemonic::Bl:
      return m + " " + hex(g.target);
    case Mnemonic::Bx:
      return m + " " + reg_name(g.rn);
    case Mnemonic::Vmsr:
      return m + " " + std::string(sysreg_name(g.sysreg)) + ", " + reg_name(g.rn);
    case Mnemonic::Vmrs:
      return m + " " + reg_name(g.rd) + ", " + std::string(sysreg_name(g.sysreg));
    case Mnemonic::Setcpsr:
      return m + " " + reg_name(g.rn);
    case Mnemonic::Getcpsr:
      return m + " " + reg_name(g.rd);
    case Mnemonic::Svc:
      return m + " " + imm_text(g.imm);
    case Mnemonic::Tlbi:
    case Mnemonic::Halt:
      return m;
  }
  return m;
}

std::string print_program(const GuestProgram& p) {
  std::ostringstream os;
  os << ".entry " << hex(p.entry) << "\n";
  std::optional<std::uint32_t> next;
  for (const auto& [addr, g] : p.instrs) {
    if (next != addr) os << ".org " << hex(addr) << "\n";
    os << "    " << print_instr(g) << "\n";
    next = addr + 4;
  }
  next.reset();
  for (const auto& [addr, w] : p.data) {
    if (next != addr) os << ".org " << hex(addr) << "\n";
    os << "    .word " << hex(w) << "\n";
    next = addr + 4;
  }
  return os.str();
}

bool is_alu(Mnemonic op) {
  switch (op) {
    case Mnemonic::Mov: case Mnemonic::Mvn: case Mnemonic::Add: case Mnemonic::Sub:
    case Mnemonic::And: case Mnemonic::Orr: case Mnemonic::Eor: case Mnemonic::Lsl:
    case Mnemonic::Lsr:
      return true;
    default:
      return false;
  }
}

bool is_privileged(Mnemonic op) {
  return op == Mnemonic::Vmsr || op == Mnemonic::Vmrs || op == Mnemonic::Setcpsr ||
         op == Mnemonic::Tlbi;
}

Category classify(const GuestInstr& g) {
  switch (g.op) {
    case Mnemonic::Ldr:
    case Mnemonic::Str:
      return Category::MemoryAccess;
    case Mnemonic::Vmsr: case Mnemonic::Vmrs: case Mnemonic::Setcpsr:
    case Mnemonic::Getcpsr: case Mnemonic::Tlbi: case Mnemonic::Svc:
      return Category::SystemLevel;
    case Mnemonic::B: case Mnemonic::Bl: case Mnemonic::Bx:
      return Category::Branch;
    case Mnemonic::Halt:
      return Category::Halt;
    default:
      return Category::RuleEligible;
  }
}

FlagSet condition_uses(Condition cond) {
  switch (cond) {
    case Condition::EQ:
    case Condition::NE:
      return kFlagZ;
    case Condition::GE:
    case Condition::LT:
      return kFlagN | kFlagV;
    case Condition::AL:
      return 0;
  }
  return 0;
}

bool condition_holds(Condition cond, std::uint8_t nzcv) {
  bool n = nzcv & kFlagN, z = nzcv & kFlagZ, v = nzcv & kFlagV;
  switch (cond) {
    case Condition::EQ: return z;
    case Condition::NE: return !z;
    case Condition::GE: return n == v;
    case Condition::LT: return n != v;
    case Condition::AL: return true;
  }
  return true;
}

Condition invert(Condition cond) {
  switch (cond) {
    case Condition::EQ: return Condition::NE;
    case Condition::NE: return Condition::EQ;
    case Condition::GE: return Condition::LT;
    case Condition::LT: return Condition::GE;
    case Condition::AL: return Condition::AL;
  }
  return cond;
}

FlagDefUse flag_def_use(const GuestInstr& g) {
  FlagDefUse r;
  r.uses = condition_uses(g.cond);
  switch (g.op) {
    case Mnemonic::Cmp: case Mnemonic::Add: case Mnemonic::Sub:
      if (g.sets_flags) r.defines = kAllFlags;
      break;
    case Mnemonic::Mov: case Mnemonic::Mvn: case Mnemonic::And:
    case Mnemonic::Orr: case Mnemonic::Eor:
      if (g.sets_flags) r.defines = kFlagN | kFlagZ;
      break;
    case Mnemonic::Lsl: case Mnemonic::Lsr:
      if (g.sets_flags) r.defines = kFlagN | kFlagZ | kFlagC;
      break;
    case Mnemonic::Setcpsr:
      r.defines = kAllFlags;
      break;
    case Mnemonic::Getcpsr:
    case Mnemonic::Svc:
      r.uses |= kAllFlags;
      break;
    default:
      break;
  }
  return r;
}

RegDefUse reg_def_use(const GuestInstr& g) {
  RegDefUse r;
  auto bit = [](int reg) { return static_cast<RegMask>(1u << reg); };
  auto src2 = [&] { return g.has_imm ? RegMask{0} : bit(g.rm); };
  switch (g.op) {
    case Mnemonic::Mov: case Mnemonic::Mvn:
      r.defs = bit(g.rd);
      r.uses = src2();
      break;
    case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And: case Mnemonic::Orr:
    case Mnemonic::Eor: case Mnemonic::Lsl: case Mnemonic::Lsr:
      r.defs = bit(g.rd);
      r.uses = bit(g.rn) | src2();
      break;
    case Mnemonic::Cmp:
      r.uses = bit(g.rn) | src2();
      break;
    case Mnemonic::Ldr:
      r.defs = bit(g.rd);
      r.uses = bit(g.rn);
      break;
    case Mnemonic::Str:
      r.uses = bit(g.rd) | bit(g.rn);
      break;
    case Mnemonic::Bl:
      r.defs = bit(kLinkReg);
      break;
    case Mnemonic::Bx:
    case Mnemonic::Vmsr:
    case Mnemonic::Setcpsr:
      r.uses = bit(g.rn);
      break;
    case Mnemonic::Vmrs:
    case Mnemonic::Getcpsr:
      r.defs = bit(g.rd);
      break;
    default:
      break;
  }
  r.kills = g.cond == Condition::AL ? r.defs : RegMask{0};
  // A conditional write leaves the old value in place on the false path.
  if (g.cond != Condition::AL) r.uses |= r.defs;
  return r;
}

bool ends_block(const GuestInstr& g) {
  auto c = classify(g);
  return c == Category::Branch || c == Category::Halt || g.op == Mnemonic::Svc;
}

std::string_view mnemonic_name(Mnemonic op) {
  for (auto [m, name] : kMnemonics)
    if (m == op) return name;
  return "?";
}

std::string_view condition_name(Condition cond) {
  for (auto [c, name] : kConditions)
    if (c == cond) return name;
  return "?";
}

std::string_view sysreg_name(SysReg reg) { return kSysRegNames[static_cast<int>(reg)]; }

std::optional<SysReg> parse_sysreg(std::string_view name) {
  for (int i = 0; i < kNumSysRegs; ++i)
    if (kSysRegNames[i] == name) return static_cast<SysReg>(i);
  return std::nullopt;
}

}  // namespace sdbt
