#include "sdbt/fuzz.hpp"

#include <random>
#include <sstream>

namespace sdbt {

namespace {

constexpr std::uint32_t kDataBase = 0x4000;
constexpr std::uint32_t kCounterAddr = 0x5000;
constexpr std::uint32_t kUnmapped = 0x00900000;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(int percent) { return pick(0, 99) < percent; }

  std::string reg(bool dest) {
    for (;;) {
      int r = pick(0, 13);
      if (dest && reserved_ & (1u << r)) continue;
      return "r" + std::to_string(r);
    }
  }

  std::string cond() {
    static const char* c[] = {"eq", "ne", "ge", "lt"};
    return chance(75) ? "" : c[pick(0, 3)];
  }

  std::string imm() {
    switch (pick(0, 3)) {
      case 0: return "#" + std::to_string(pick(0, 3));
      case 1: return "#" + std::to_string(pick(-8, 40));
      case 2: return "#" + std::to_string(pick(0, 0x7fff) << pick(0, 16));
      default: return "#" + std::to_string(pick(28, 33));
    }
  }

  std::string src2() { return chance(50) ? reg(false) : imm(); }

  void alu() {
    static const char* ops[] = {"add", "sub", "and", "orr", "eor", "lsl", "lsr"};
    int kind = pick(0, 9);
    std::string s = chance(35) ? "s" : "";
    if (kind < 6) {
      line(std::string(ops[pick(0, 6)]) + cond() + s + " " + reg(true) + ", " + reg(false) + ", " + src2());
    } else if (kind < 8) {
      line(std::string(chance(70) ? "mov" : "mvn") + cond() + s + " " + reg(true) + ", " + src2());
    } else if (kind == 8) {
      line("cmp" + cond() + " " + reg(false) + ", " + src2());
    } else {
      std::string d = reg(true);
      line("mov " + d + ", " + reg(false));
      line("add " + d + ", " + d + ", " + imm());
    }
  }

  void memory() {
    std::string base = reg(true);
    std::uint32_t addr = kDataBase + static_cast<std::uint32_t>(pick(0, 60)) * 4;
    int fault = pick(0, 99);
    if (fault < 4) addr = kUnmapped;
    else if (fault < 7) addr += 2;
    line("mov " + base + ", #" + std::to_string(addr));
    int n = pick(1, 3);
    for (int k = 0; k < n; ++k) {
      std::string off = "#" + std::to_string(pick(0, 6) * 4);
      std::string r = reg(chance(50));
      if (chance(50)) {
        std::string d = reg(true);
        line("ldr " + d + ", [" + base + ", " + off + "]");
        if (d == base) return;
      } else {
        line("str " + r + ", [" + base + ", " + off + "]");
      }
    }
  }

  void system(bool privileged) {
    switch (pick(0, 5)) {
      case 0: line("vmsr " + std::string(chance(50) ? "fpscr" : "fpexc") + ", " + reg(false)); break;
      case 1: line("vmrs " + reg(true) + ", " + std::string(chance(50) ? "fpscr" : "fpexc")); break;
      case 2: line("getcpsr " + reg(true)); break;
      case 3:
        if (privileged) {
          // Flip flags only; mode and mask stay as they are.
          std::string t = reg(true);
          line("getcpsr " + t);
          line("eor " + t + ", " + t + ", #" + std::to_string(pick(1, 15) << 28));
          line("setcpsr " + t);
        } else {
          line("setcpsr " + reg(false));  // privilege fault, skipped by the handler
        }
        break;
      case 4: line("tlbi"); break;
      default:
        if (!privileged) line("svc #" + std::to_string(kFuzzSvcVector));
        else line("vmrs " + reg(true) + ", fpscr");
        break;
    }
  }

  void straight(int n, bool privileged) {
    for (int i = 0; i < n; ++i) {
      int k = pick(0, 99);
      if (k < 62) alu();
      else if (k < 84) memory();
      else system(privileged);
    }
  }

  std::string label() { return "L" + std::to_string(next_label_++); }

  void line(const std::string& s) { out_ << "    " << s << "\n"; }
  void place(const std::string& l) { out_ << l << ":\n"; }

  std::mt19937_64 rng_;
  std::ostringstream out_;
  std::uint16_t reserved_ = 1u << kLinkReg;
  int next_label_ = 0;
};

void emit_handlers(std::ostringstream& out) {
  out << ".org " << kFuzzIrqHandler << "\n"
      << "    vmsr scratch0, r12\n    vmsr scratch1, r13\n"
      << "    mov r12, #" << kCounterAddr << "\n"
      << "    ldr r13, [r12]\n    add r13, r13, #1\n    str r13, [r12]\n"
      << "    vmrs r12, scratch0\n    vmrs r13, scratch1\n    svc #0\n";
  out << ".org " << kFuzzSkipHandler << "\n"
      << "    vmsr scratch0, r13\n    vmrs r13, elr\n    add r13, r13, #4\n    vmsr elr, r13\n"
      << "    mov r13, #" << kCounterAddr + 4 << "\n    vmsr scratch1, r12\n"
      << "    ldr r12, [r13]\n    add r12, r12, #1\n    str r12, [r13]\n"
      << "    vmrs r12, scratch1\n    vmrs r13, scratch0\n    svc #0\n";
  out << ".org " << kFuzzSvcHandler << "\n"
      << "    vmsr scratch0, r13\n    mov r13, #" << kCounterAddr + 8 << "\n"
      << "    str r13, [r13]\n    vmrs r13, scratch0\n    svc #0\n";
}

}  // namespace

Workload random_workload(std::uint64_t seed) {
  Gen g(seed);
  const bool privileged = g.chance(70);
  for (int r = 0; r < 14; ++r)
    if (g.chance(60)) g.line("mov r" + std::to_string(r) + ", #" + std::to_string(g.pick(-50, 50)));
  std::vector<std::string> subs;
  int segments = g.pick(2, 8);
  for (int s = 0; s < segments; ++s) {
    switch (g.pick(0, 4)) {
      case 0: {  // forward conditional skip
        std::string l = g.label();
        static const char* c[] = {"eq", "ne", "ge", "lt"};
        g.line("b" + std::string(c[g.pick(0, 3)]) + " " + l);
        g.straight(g.pick(1, 4), privileged);
        g.place(l);
        break;
      }
      case 1: {  // counted loop on r9
        std::string l = g.label();
        g.line("mov r9, #" + std::to_string(g.pick(1, 6)));
        g.place(l);
        g.reserved_ |= 1u << 9;
        g.straight(g.pick(1, 8), privileged);
        g.reserved_ &= ~(1u << 9);
        g.line("subs r9, r9, #1");
        g.line("bne " + l);
        break;
      }
      case 2: {  // call
        std::string l = "S" + std::to_string(subs.size());
        subs.push_back(l);
        g.line("bl " + l);
        break;
      }
      default:
        g.straight(g.pick(1, 12), privileged);
        break;
    }
  }
  g.line("halt");
  std::ostringstream body;
  body << g.out_.str();
  for (const auto& s : subs) {
    g.out_.str("");
    g.place(s);
    g.straight(g.pick(1, 6), privileged);
    g.line("bx r14");
    body << g.out_.str();
  }
  emit_handlers(body);

  Workload w;
  w.name = "fuzz-" + std::to_string(seed);
  w.program = parse_guest_asm(body.str());
  w.mode = privileged ? Mode::Privileged : Mode::User;
  w.handlers = {{kFuzzIrqVector, kFuzzIrqHandler},
                {kVectorDataAbort, kFuzzSkipHandler},
                {kVectorUndefined, kFuzzSkipHandler},
                {kFuzzSvcVector, kFuzzSvcHandler}};
  int n_irq = g.pick(0, 4);
  for (int i = 0; i < n_irq; ++i)
    w.interrupts.push_back({static_cast<std::uint64_t>(g.pick(0, 120)), kFuzzIrqVector});
  return w;
}

std::vector<GuestInstr> random_block(std::uint64_t seed) {
  Gen g(seed);
  g.straight(g.pick(1, 20), g.chance(70));
  static const char* term[] = {"halt", "beq 0", "b 0", "bx r3", "bl 0", "bne 0x40", "svc #7"};
  if (g.chance(85)) g.line(term[g.pick(0, 6)]);
  GuestProgram p = parse_guest_asm(g.out_.str());
  std::vector<GuestInstr> tb;
  for (auto& [a, i] : p.instrs) {
    (void)a;
    tb.push_back(i);
    if (ends_block(i) || static_cast<int>(tb.size()) == kMaxTbLength) break;
  }
  return tb;
}

std::vector<DiffConfig> standard_configs() {
  return {{Pipeline::Baseline, OptLevel::Base, true},
          {Pipeline::Rules, OptLevel::Base, true},
          {Pipeline::Rules, OptLevel::Reduction, true},
          {Pipeline::Rules, OptLevel::Elimination, true},
          {Pipeline::Rules, OptLevel::Scheduling, true}};
}

std::string config_name(const DiffConfig& c) {
  std::string s = c.pipeline == Pipeline::Baseline ? "baseline" : "rules@" + std::string(opt_level_name(c.level));
  if (!c.chaining) s += "/nochain";
  return s;
}

DiffReport diff_check(const Workload& w, const RuleSet& rules, const std::vector<DiffConfig>& configs,
                      std::uint64_t fuel) {
  DiffReport rep;
  Machine m = build_machine(w);
  InterpOptions io;
  io.fuel = fuel;
  io.record_trace = false;
  InterpResult ref = run_reference(w.program, m, io);
  for (const DiffConfig& c : configs) {
    DbtResult got = run_dbt(w.program, m, rules, RuntimeConfig{c.pipeline, c.level, c.chaining, fuel, {}});
    std::string why;
    if (got.status != ref.status) {
      why = std::string("status ") + std::string(run_status_name(got.status)) + " vs " +
            std::string(run_status_name(ref.status));
    } else if (ref.status == RunStatus::Halted) {
      why = quiescent_diff(got.state, got.mem, ref.state, ref.mem);
      if (why.empty() && got.counters.guest_num != ref.retired) why = "retired count differs";
      if (why.empty() && got.counters.interrupts != ref.interrupts) why = "interrupt count differs";
    }
    if (!why.empty()) {
      rep.ok = false;
      rep.detail = w.name + " " + config_name(c) + ": " + why;
      return rep;
    }
  }
  return rep;
}

}  // namespace sdbt
