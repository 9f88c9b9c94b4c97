#include "sdbt/interpreter.hpp"

namespace sdbt {

std::string_view run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Halted: return "halted";
    case RunStatus::FuelExhausted: return "fuel_exhausted";
    case RunStatus::UndefinedInstruction: return "undefined_instruction";
    case RunStatus::UnconfiguredVector: return "unconfigured_vector";
  }
  return "?";
}

namespace {

std::uint8_t nz_of(std::uint32_t v) {
  std::uint8_t f = 0;
  if (v & 0x80000000u) f |= kFlagN;
  if (v == 0) f |= kFlagZ;
  return f;
}

}  // namespace

AluOut guest_alu(Mnemonic op, std::uint32_t a, std::uint32_t b, std::uint8_t in) {
  AluOut o;
  std::uint8_t cv = in & (kFlagC | kFlagV);
  switch (op) {
    case Mnemonic::Add: {
      o.value = a + b;
      std::uint8_t f = nz_of(o.value);
      if (o.value < a) f |= kFlagC;
      if (((a ^ o.value) & (b ^ o.value)) >> 31) f |= kFlagV;
      o.nzcv = f;
      return o;
    }
    case Mnemonic::Sub:
    case Mnemonic::Cmp: {
      o.value = a - b;
      std::uint8_t f = nz_of(o.value);
      if (a >= b) f |= kFlagC;
      if (((a ^ b) & (a ^ o.value)) >> 31) f |= kFlagV;
      o.nzcv = f;
      return o;
    }
    case Mnemonic::Lsl:
    case Mnemonic::Lsr: {
      std::uint32_t amt = b & 0xFF;
      bool left = op == Mnemonic::Lsl;
      std::uint8_t c = in & kFlagC;
      if (amt == 0) {
        o.value = a;
      } else if (amt <= 32) {
        o.value = amt == 32 ? 0 : (left ? a << amt : a >> amt);
        std::uint32_t out_bit = left ? (a >> (32 - amt)) & 1 : (a >> (amt - 1)) & 1;
        c = out_bit ? kFlagC : 0;
      } else {
        o.value = 0;
        c = 0;
      }
      o.nzcv = static_cast<std::uint8_t>(nz_of(o.value) | c | (in & kFlagV));
      return o;
    }
    case Mnemonic::And: o.value = a & b; break;
    case Mnemonic::Orr: o.value = a | b; break;
    case Mnemonic::Eor: o.value = a ^ b; break;
    case Mnemonic::Mov: o.value = b; break;
    case Mnemonic::Mvn: o.value = ~b; break;
    default: throw std::invalid_argument("guest_alu: not an ALU op");
  }
  o.nzcv = static_cast<std::uint8_t>(nz_of(o.value) | cv);
  return o;
}

Interpreter::Interpreter(const GuestProgram& program, Machine& machine, InterpOptions opts)
    : program_(program), m_(machine), opts_(opts) {}

std::uint32_t Interpreter::src2(const GuestInstr& g) const {
  return g.has_imm ? static_cast<std::uint32_t>(g.imm) : m_.state.r[g.rm];
}

StepEvent Interpreter::step() {
  GuestState& s = m_.state;
  if (deliver_interrupt(m_, retired_)) {
    ++interrupts_;
    return StepEvent::Interrupt;
  }
  const GuestInstr* g = program_.find(s.pc);
  if (!g) return StepEvent::Undefined;
  if (g->op == Mnemonic::Halt) return StepEvent::Halt;
  bool run = condition_holds(g->cond, s.nzcv);
  if (run && !exec(*g)) {
    ++exceptions_;
    return StepEvent::Exception;
  }
  if (!run) s.pc += 4;
  ++retired_;
  if (opts_.record_trace) trace_.push_back({g->addr, run});
  return StepEvent::Retired;
}

bool Interpreter::exec(const GuestInstr& g) {
  GuestState& s = m_.state;
  std::uint32_t next = g.addr + 4;
  auto fault = [&](int vector, std::uint32_t far) {
    if (vector == kVectorDataAbort) s.sysreg(SysReg::Far) = far;
    enter_exception(s, vector, g.addr, m_.handlers);
    return false;
  };
  switch (g.op) {
    case Mnemonic::Mov: case Mnemonic::Mvn: case Mnemonic::Add: case Mnemonic::Sub:
    case Mnemonic::And: case Mnemonic::Orr: case Mnemonic::Eor: case Mnemonic::Lsl:
    case Mnemonic::Lsr: {
      AluOut o = guest_alu(g.op, s.r[g.rn], src2(g), s.nzcv);
      s.r[g.rd] = o.value;
      if (g.sets_flags) s.nzcv = o.nzcv;
      break;
    }
    case Mnemonic::Cmp:
      s.nzcv = guest_alu(g.op, s.r[g.rn], src2(g), s.nzcv).nzcv;
      break;
    case Mnemonic::Ldr:
    case Mnemonic::Str: {
      std::uint32_t va = s.r[g.rn] + static_cast<std::uint32_t>(g.imm);
      bool write = g.op == Mnemonic::Str;
      if (va & 3) return fault(kVectorDataAbort, va);
      std::uint32_t root = s.sysreg(SysReg::Ttbr);
      Access acc = write ? Access::Write : Access::Read;
      Translation t = opts_.use_tlb ? tlb_lookup_or_fill(va, acc, tlb_, root, m_.mem)
                                    : page_walk(va, acc, root, m_.mem);
      if (!t.ok()) return fault(kVectorDataAbort, va);
      if (write) {
        m_.mem.write32(*t.gpa, s.r[g.rd]);
      } else {
        s.r[g.rd] = m_.mem.read32(*t.gpa);
      }
      break;
    }
    case Mnemonic::B:
      next = g.target;
      break;
    case Mnemonic::Bl:
      s.r[kLinkReg] = g.addr + 4;
      next = g.target;
      break;
    case Mnemonic::Bx:
      next = s.r[g.rn];
      break;
    case Mnemonic::Svc:
      if (s.mode == Mode::Privileged) {
        exception_return(s);
        return true;
      }
      enter_exception(s, g.imm, g.addr + 4, m_.handlers);
      return true;
    case Mnemonic::Vmsr: case Mnemonic::Vmrs: case Mnemonic::Setcpsr: case Mnemonic::Tlbi:
      if (s.mode != Mode::Privileged) return fault(kVectorUndefined, 0);
      if (g.op == Mnemonic::Vmsr) {
        s.sysregs[static_cast<int>(g.sysreg)] = s.r[g.rn];
      } else if (g.op == Mnemonic::Vmrs) {
        s.r[g.rd] = s.sysregs[static_cast<int>(g.sysreg)];
      } else if (g.op == Mnemonic::Setcpsr) {
        s.set_cpsr(s.r[g.rn]);
      } else {
        tlb_.flush();
      }
      break;
    case Mnemonic::Getcpsr:
      s.r[g.rd] = s.cpsr();
      break;
    case Mnemonic::Halt:
      break;
  }
  s.pc = next;
  return true;
}

InterpResult Interpreter::run() {
  InterpResult res;
  try {
    for (;;) {
      // Fuel bounds retired instructions; a halt reached exactly at the limit
      // still counts as a clean halt.
      if (retired_ >= opts_.fuel) {
        const GuestInstr* g = program_.find(m_.state.pc);
        bool irq_due = !m_.state.irq_masked && m_.irq.pending(retired_);
        if (!(g && g->op == Mnemonic::Halt && !irq_due)) {
          res.status = RunStatus::FuelExhausted;
          break;
        }
      }
      StepEvent e = step();
      if (e == StepEvent::Halt) {
        res.status = RunStatus::Halted;
        break;
      }
      if (e == StepEvent::Undefined) {
        res.status = RunStatus::UndefinedInstruction;
        break;
      }
    }
  } catch (const UnconfiguredVector& e) {
    res.status = RunStatus::UnconfiguredVector;
    res.error = e.what();
  }
  res.state = m_.state;
  res.mem = m_.mem;
  res.retired = retired_;
  res.interrupts = interrupts_;
  res.exceptions = exceptions_;
  res.trace = std::move(trace_);
  return res;
}

InterpResult run_reference(const GuestProgram& program, Machine machine, InterpOptions opts) {
  Interpreter it(program, machine, opts);
  return it.run();
}

}  // namespace sdbt
