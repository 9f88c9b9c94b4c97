#include "sdbt/host_isa.hpp"

#include <sstream>

namespace sdbt {

std::string_view host_tag_name(HostTag t) {
  switch (t) {
    case HostTag::Translated: return "translated";
    case HostTag::Sync: return "sync";
    case HostTag::Helper: return "helper";
    case HostTag::Check: return "check";
    case HostTag::Chain: return "chain";
  }
  return "?";
}

namespace h {

HostInstr alu(HostOp op, int dst, int a, int b, bool f) {
  HostInstr i;
  i.op = op;
  i.dst = static_cast<std::uint8_t>(dst);
  i.a = static_cast<std::uint8_t>(a);
  i.b = static_cast<std::uint8_t>(b);
  i.set_flags = f;
  return i;
}

HostInstr alui(HostOp op, int dst, int a, std::int32_t imm, bool f) {
  HostInstr i = alu(op, dst, a, 0, f);
  i.b_imm = true;
  i.imm = imm;
  return i;
}

HostInstr mov(int dst, int src, bool f) { return alu(HostOp::Mov, dst, 0, src, f); }
HostInstr movi(int dst, std::int32_t imm, bool f) { return alui(HostOp::Mov, dst, 0, imm, f); }
HostInstr cmp(int a, int b) { return alu(HostOp::Cmp, 0, a, b, true); }
HostInstr cmpi(int a, std::int32_t imm) { return alui(HostOp::Cmp, 0, a, imm, true); }

HostInstr jcc(Condition c, std::int32_t target) {
  HostInstr i;
  i.op = HostOp::Jcc;
  i.cond = c;
  i.target = target;
  return i;
}

HostInstr jmp(std::int32_t target) {
  HostInstr i;
  i.op = HostOp::Jmp;
  i.target = target;
  return i;
}

HostInstr ld(int dst, Slot s) {
  HostInstr i;
  i.op = HostOp::Ld;
  i.dst = static_cast<std::uint8_t>(dst);
  i.slot = s;
  return i;
}

HostInstr st(Slot s, int src) {
  HostInstr i;
  i.op = HostOp::St;
  i.a = static_cast<std::uint8_t>(src);
  i.slot = s;
  return i;
}

HostInstr sti(Slot s, std::int32_t imm) {
  HostInstr i;
  i.op = HostOp::St;
  i.b_imm = true;
  i.imm = imm;
  i.slot = s;
  return i;
}

HostInstr flags2reg(int dst) {
  HostInstr i;
  i.op = HostOp::Flags2Reg;
  i.dst = static_cast<std::uint8_t>(dst);
  return i;
}

HostInstr reg2flags(int src) {
  HostInstr i;
  i.op = HostOp::Reg2Flags;
  i.a = static_cast<std::uint8_t>(src);
  return i;
}

HostInstr flagext(int dst, FlagSet flag) {
  HostInstr i;
  i.op = HostOp::FlagExt;
  i.dst = static_cast<std::uint8_t>(dst);
  i.flag = flag;
  return i;
}

HostInstr condext(int dst, Condition c) {
  HostInstr i;
  i.op = HostOp::FlagExt;
  i.dst = static_cast<std::uint8_t>(dst);
  i.cond = c;
  return i;
}

HostInstr call(HelperId id, std::uint16_t guest) {
  HostInstr i;
  i.op = HostOp::Call;
  i.helper = id;
  i.guest = guest;
  return i;
}

HostInstr exit(std::uint16_t index) {
  HostInstr i;
  i.op = HostOp::Exit;
  i.exit = index;
  return i;
}

}  // namespace h

HostInstr tagged(HostInstr i, HostTag t) {
  i.tag = t;
  return i;
}

namespace {

std::string_view op_name(HostOp op) {
  switch (op) {
    case HostOp::Mov: return "hmov";
    case HostOp::Add: return "hadd";
    case HostOp::Sub: return "hsub";
    case HostOp::And: return "hand";
    case HostOp::Or: return "hor";
    case HostOp::Xor: return "hxor";
    case HostOp::Shl: return "hshl";
    case HostOp::Shr: return "hshr";
    case HostOp::Cmp: return "hcmp";
    case HostOp::Jcc: return "hjcc";
    case HostOp::Jmp: return "hjmp";
    case HostOp::Ld: return "hld";
    case HostOp::St: return "hst";
    case HostOp::Flags2Reg: return "hflags2reg";
    case HostOp::Reg2Flags: return "hreg2flags";
    case HostOp::FlagExt: return "hflagext";
    case HostOp::Call: return "hcall";
    case HostOp::Exit: return "hexit";
  }
  return "?";
}

std::string slot_name(Slot s) {
  int v = static_cast<int>(s);
  if (v < kNumGuestRegs) return "r" + std::to_string(v);
  switch (s) {
    case Slot::FlagN: return "N";
    case Slot::FlagZ: return "Z";
    case Slot::FlagC: return "C";
    case Slot::FlagV: return "V";
    case Slot::Pc: return "pc";
    case Slot::CcrPacked: return "ccr";
    case Slot::Pending: return "pending";
    case Slot::Spill0: return "spill0";
    case Slot::Spill1: return "spill1";
    default: return "?";
  }
}

std::string flag_name(FlagSet f) {
  switch (f) {
    case kFlagN: return "N";
    case kFlagZ: return "Z";
    case kFlagC: return "C";
    case kFlagV: return "V";
    default: return "?";
  }
}

}  // namespace

std::string print_host(const HostInstr& i) {
  std::ostringstream os;
  os << op_name(i.op);
  if (i.set_flags && i.op != HostOp::Cmp) os << ".f";
  auto r = [](int n) { return "h" + std::to_string(n); };
  auto src2 = [&] { return i.b_imm ? "#" + std::to_string(i.imm) : r(i.b); };
  switch (i.op) {
    case HostOp::Mov: os << " " << r(i.dst) << ", " << src2(); break;
    case HostOp::Cmp: os << " " << r(i.a) << ", " << src2(); break;
    case HostOp::Jcc: os << " " << condition_name(i.cond) << ", " << i.target; break;
    case HostOp::Jmp: os << " " << i.target; break;
    case HostOp::Ld: os << " " << r(i.dst) << ", [" << slot_name(i.slot) << "]"; break;
    case HostOp::St:
      os << " [" << slot_name(i.slot) << "], " << (i.b_imm ? "#" + std::to_string(i.imm) : r(i.a));
      break;
    case HostOp::Flags2Reg: os << " " << r(i.dst); break;
    case HostOp::Reg2Flags: os << " " << r(i.a); break;
    case HostOp::FlagExt:
      os << " " << r(i.dst) << ", " << (i.flag ? flag_name(i.flag) : std::string(condition_name(i.cond)));
      break;
    case HostOp::Call:
      os << " " << (i.helper == HelperId::Memory ? "mem" : "sys") << ", g" << i.guest << ", stub " << i.target;
      break;
    case HostOp::Exit: os << " " << i.exit; break;
    default: os << " " << r(i.dst) << ", " << r(i.a) << ", " << src2(); break;
  }
  return os.str();
}

std::string print_host(const std::vector<HostInstr>& code) {
  std::ostringstream os;
  for (std::size_t k = 0; k < code.size(); ++k)
    os << k << ":\t" << print_host(code[k]) << "\t; " << host_tag_name(code[k].tag) << "\n";
  return os.str();
}

namespace {

std::uint8_t nz(std::uint32_t v) {
  return static_cast<std::uint8_t>(((v >> 31) ? kFlagN : 0) | (v == 0 ? kFlagZ : 0));
}

}  // namespace

HostAluOut host_alu(HostOp op, std::uint32_t a, std::uint32_t b, std::uint8_t flags) {
  HostAluOut o;
  std::uint8_t keep_cv = flags & (kFlagC | kFlagV);
  switch (op) {
    case HostOp::Add: {
      std::uint64_t wide = std::uint64_t{a} + b;
      o.value = static_cast<std::uint32_t>(wide);
      bool v = (~(a ^ b) & (a ^ o.value)) >> 31;
      o.flags = static_cast<std::uint8_t>(nz(o.value) | ((wide >> 32) ? kFlagC : 0) | (v ? kFlagV : 0));
      return o;
    }
    case HostOp::Sub:
    case HostOp::Cmp: {
      o.value = a - b;
      bool borrow = b > a;
      bool v = ((a ^ b) & (a ^ o.value)) >> 31;
      o.flags = static_cast<std::uint8_t>(nz(o.value) | (borrow ? 0 : kFlagC) | (v ? kFlagV : 0));
      return o;
    }
    case HostOp::Shl:
    case HostOp::Shr: {
      unsigned n = b & 0xFF;
      std::uint8_t c = flags & kFlagC;
      if (n == 0) {
        o.value = a;
      } else if (n > 32) {
        o.value = 0;
        c = 0;
      } else {
        std::uint64_t wide = a;
        if (op == HostOp::Shl) {
          wide <<= n;
          c = ((wide >> 32) & 1) ? kFlagC : 0;
        } else {
          c = ((wide >> (n - 1)) & 1) ? kFlagC : 0;
          wide >>= n;
        }
        o.value = static_cast<std::uint32_t>(wide);
      }
      o.flags = static_cast<std::uint8_t>(nz(o.value) | c | (flags & kFlagV));
      return o;
    }
    case HostOp::And: o.value = a & b; break;
    case HostOp::Or: o.value = a | b; break;
    case HostOp::Xor: o.value = a ^ b; break;
    case HostOp::Mov: o.value = b; break;
    default: throw HostFault("host_alu: bad op");
  }
  o.flags = static_cast<std::uint8_t>(nz(o.value) | keep_cv);
  return o;
}

std::uint64_t VmCounters::total() const {
  std::uint64_t t = 0;
  for (auto c : by_tag) t += c;
  return t;
}

void VmCounters::add(const VmCounters& o) {
  for (int k = 0; k < kNumHostTags; ++k) by_tag[static_cast<std::size_t>(k)] += o.by_tag[static_cast<std::size_t>(k)];
  helper_internal += o.helper_internal;
  sync_ops += o.sync_ops;
  stale_ccr_reads += o.stale_ccr_reads;
}

namespace {

bool is_flag_slot(Slot s) {
  return s == Slot::FlagN || s == Slot::FlagZ || s == Slot::FlagC || s == Slot::FlagV;
}

}  // namespace

std::uint16_t vm_execute(const std::vector<HostInstr>& code, VmContext& ctx, HelperHost& helpers) {
  EmuStateArea& area = *ctx.area;
  std::size_t pc = 0;
  // Generous bound: translated blocks are straight-line apart from forward skips.
  for (std::size_t steps = 0; steps < code.size() * 4 + 64; ++steps) {
    if (pc >= code.size()) throw HostFault("host pc out of range");
    const HostInstr& i = code[pc];
    ++ctx.counters.by_tag[static_cast<std::size_t>(i.tag)];
    if (i.sync_start) ++ctx.counters.sync_ops;
    std::size_t next = pc + 1;
    auto src2 = [&] { return i.b_imm ? static_cast<std::uint32_t>(i.imm) : ctx.h[i.b]; };
    switch (i.op) {
      case HostOp::Mov: case HostOp::Add: case HostOp::Sub: case HostOp::And:
      case HostOp::Or: case HostOp::Xor: case HostOp::Shl: case HostOp::Shr: {
        HostAluOut o = host_alu(i.op, ctx.h[i.a], src2(), ctx.flags);
        ctx.h[i.dst] = o.value;
        if (i.set_flags) ctx.flags = o.flags;
        break;
      }
      case HostOp::Cmp:
        ctx.flags = host_alu(HostOp::Cmp, ctx.h[i.a], src2(), ctx.flags).flags;
        break;
      case HostOp::Jcc:
        if (condition_holds(i.cond, ctx.flags)) next = static_cast<std::size_t>(i.target);
        break;
      case HostOp::Jmp:
        next = static_cast<std::size_t>(i.target);
        break;
      case HostOp::Ld:
        if (i.slot == Slot::CcrPacked && !area.packed_fresh()) ++ctx.counters.stale_ccr_reads;
        if (is_flag_slot(i.slot) && area.stamp(i.slot) < area.stamp(Slot::CcrPacked))
          ++ctx.counters.stale_ccr_reads;
        ctx.h[i.dst] = area.get(i.slot);
        break;
      case HostOp::St:
        area.set(i.slot, i.b_imm ? static_cast<std::uint32_t>(i.imm) : ctx.h[i.a]);
        break;
      case HostOp::Flags2Reg:
        ctx.h[i.dst] = ctx.flags;
        break;
      case HostOp::Reg2Flags:
        ctx.flags = static_cast<std::uint8_t>(ctx.h[i.a] & 0xF);
        break;
      case HostOp::FlagExt:
        ctx.h[i.dst] = i.flag ? ((ctx.flags & i.flag) ? 1 : 0) : (condition_holds(i.cond, ctx.flags) ? 1 : 0);
        break;
      case HostOp::Call: {
        int cost = 0;
        bool ok = helpers.call_helper(i.helper, i.guest, cost);
        ctx.counters.helper_internal += static_cast<std::uint64_t>(cost);
        ctx.counters.by_tag[static_cast<std::size_t>(HostTag::Helper)] += static_cast<std::uint64_t>(cost);
        // Helpers clobber FLAGS and the staging/scratch registers.
        ctx.flags = static_cast<std::uint8_t>(~ctx.flags & 0xF);
        for (int r = 12; r < kNumHostRegs; ++r) ctx.h[static_cast<std::size_t>(r)] = 0xDEADBEEF;
        if (!ok) next = static_cast<std::size_t>(i.target);
        break;
      }
      case HostOp::Exit:
        return i.exit;
    }
    pc = next;
  }
  throw HostFault("host code did not reach an exit");
}

}  // namespace sdbt
