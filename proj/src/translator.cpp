#include "sdbt/translator.hpp"

#include <array>
#include <bit>
#include <span>

#include "emit.hpp"

namespace sdbt {

std::string_view sync_cause_name(SyncCause c) {
  switch (c) {
    case SyncCause::SystemLevel: return "system_level";
    case SyncCause::MemoryAccess: return "memory_access";
    case SyncCause::InterruptCheck: return "interrupt_check";
    case SyncCause::TbBoundary: return "tb_boundary";
    case SyncCause::ConstrainedRule: return "constrained_rule";
    case SyncCause::Fallback: return "fallback";
  }
  return "?";
}

namespace {

constexpr std::array<std::pair<FlagSet, int>, 4> kFlagOrder{{{kFlagN, 3}, {kFlagZ, 2}, {kFlagC, 1}, {kFlagV, 0}}};

void save_ccr_full(std::vector<HostInstr>& out) {
  out.push_back(h::st(Slot::Spill0, 14));
  out.push_back(h::st(Slot::Spill1, 15));
  out.push_back(h::flags2reg(15));
  for (auto [f, pos] : kFlagOrder) {
    (void)pos;
    out.push_back(h::flagext(14, f));
    out.push_back(h::st(flag_slot(f), 14));
  }
  out.push_back(h::reg2flags(15));
  out.push_back(h::ld(14, Slot::Spill0));
  out.push_back(h::ld(15, Slot::Spill1));
}

void restore_ccr_full(std::vector<HostInstr>& out) {
  out.push_back(h::st(Slot::Spill0, 14));
  out.push_back(h::movi(15, 0));
  for (auto [f, pos] : kFlagOrder) {
    out.push_back(h::ld(14, flag_slot(f)));
    if (pos) out.push_back(h::alui(HostOp::Shl, 14, 14, pos));
    out.push_back(h::alu(HostOp::Or, 15, 15, 14));
  }
  out.push_back(h::reg2flags(15));
}

}  // namespace

std::vector<HostInstr> lower_sync(const SyncOp& op) {
  const Components& c = op.comps;
  if (c.empty()) throw SyncError(SyncError::Kind::Empty, "sync operation with no components");
  if (c.gprs & ~kResidentMask)
    throw SyncError(SyncError::Kind::UnknownComponent, "sync of a non-resident register");
  if (c.pc && op.kind == SyncKind::Restore)
    throw SyncError(SyncError::Kind::UnknownComponent, "pc cannot be restored");
  std::vector<HostInstr> out;
  for (int r = 0; r < kNumResidentRegs; ++r) {
    if (!(c.gprs & (1u << r))) continue;
    out.push_back(op.kind == SyncKind::Save ? h::st(gpr_slot(r), r) : h::ld(r, gpr_slot(r)));
  }
  if (c.pc) out.push_back(h::sti(Slot::Pc, static_cast<std::int32_t>(op.pc_value)));
  if (c.ccr) {
    if (op.mode == SyncMode::Full) {
      op.kind == SyncKind::Save ? save_ccr_full(out) : restore_ccr_full(out);
    } else if (op.kind == SyncKind::Save) {
      out.push_back(h::st(Slot::Spill1, 15));
      out.push_back(h::flags2reg(15));
      out.push_back(h::st(Slot::CcrPacked, 15));
    } else {
      out.push_back(h::ld(15, Slot::CcrPacked));
      out.push_back(h::reg2flags(15));
      out.push_back(h::ld(15, Slot::Spill1));
    }
  }
  for (auto& i : out) i.tag = HostTag::Sync;
  out.front().sync_start = true;
  return out;
}

int sync_length(const SyncOp& op) {
  int n = std::popcount(static_cast<unsigned>(op.comps.gprs)) + (op.comps.pc ? 1 : 0);
  if (op.comps.ccr) n += op.mode == SyncMode::Full ? 14 : 3;
  return n;
}

std::vector<GuestInstr> scan_tb(const GuestProgram& program, std::uint32_t pc, int max_len) {
  std::vector<GuestInstr> tb;
  for (std::uint32_t a = pc; static_cast<int>(tb.size()) < max_len; a += 4) {
    const GuestInstr* g = program.find(a);
    if (!g) break;
    tb.push_back(*g);
    if (ends_block(*g)) break;
  }
  return tb;
}

namespace {

Components ccr_and(RegMask m) { return Components{static_cast<RegMask>(m & kResidentMask), true, false}; }

void init_block(HostBlock& b, const std::vector<GuestInstr>& tb, Pipeline p) {
  if (tb.empty()) throw std::invalid_argument("empty translation block");
  b.pipeline = p;
  b.guest_pc = tb.front().addr;
  b.tb = tb;
  b.span.assign(tb.size(), 1);
  b.rule_covered.assign(tb.size(), false);
  b.fallback.assign(tb.size(), false);
}

// Emits the helper bracket for a memory or system-level instruction.
void emit_helper_site(detail::Emitter& e, int i, const GuestInstr& g) {
  auto bit = [](int r) { return static_cast<RegMask>(1u << r); };
  SyncCause cause = classify(g) == Category::MemoryAccess ? SyncCause::MemoryAccess : SyncCause::SystemLevel;
  HelperId id = cause == SyncCause::MemoryAccess ? HelperId::Memory : HelperId::System;
  Components before = ccr_and(0), after = ccr_and(0);
  switch (g.op) {
    case Mnemonic::Ldr: before = ccr_and(bit(g.rn)); after = ccr_and(bit(g.rd)); break;
    case Mnemonic::Str: before = ccr_and(bit(g.rn) | bit(g.rd)); break;
    case Mnemonic::Vmsr: before = ccr_and(bit(g.rn)); break;
    case Mnemonic::Vmrs: after = ccr_and(bit(g.rd)); break;
    case Mnemonic::Setcpsr: before = ccr_and(bit(g.rn)); break;
    case Mnemonic::Getcpsr: after = ccr_and(bit(g.rd)); break;
    default: break;
  }
  e.sync(SyncKind::Save, before, cause, i);
  e.helper(id, i);
  e.sync(SyncKind::Restore, after, cause, i);
}

}  // namespace

HostBlock translate_tb_rules(const std::vector<GuestInstr>& tb, const RuleSet& rules) {
  HostBlock b;
  init_block(b, tb, Pipeline::Rules);
  detail::Emitter e(b);
  e.check();
  e.sync(SyncKind::Restore, ccr_and(0), SyncCause::InterruptCheck, -1);
  bool area_ccr_fresh = true;
  const int n = static_cast<int>(tb.size());
  bool terminated = false;
  for (int i = 0; i < n && !terminated; ) {
    const GuestInstr& g = tb[static_cast<std::size_t>(i)];
    if (ends_block(g)) {
      detail::emit_terminator(e, i, true, true);
      terminated = true;
      break;
    }
    Category cat = classify(g);
    if (cat == Category::MemoryAccess || cat == Category::SystemLevel) {
      emit_helper_site(e, i, g);
      area_ccr_fresh = true;
      ++i;
      continue;
    }
    auto bind = match_rule(std::span<const GuestInstr>(tb).subspan(static_cast<std::size_t>(i)), rules);
    if (!bind) {
      RegDefUse du = reg_def_use(g);
      b.fallback[static_cast<std::size_t>(i)] = true;
      e.sync(SyncKind::Save, ccr_and(du.uses), SyncCause::Fallback, i);
      detail::emit_area_body(e, i, g, detail::kFallbackTemps, false);
      e.sync(SyncKind::Restore, ccr_and(du.defs), SyncCause::Fallback, i);
      area_ccr_fresh = true;
      ++i;
      continue;
    }
    RegMask uses = 0, defs = 0;
    bool defines_flags = false;
    for (int k = 0; k < bind->span; ++k) {
      const GuestInstr& c = tb[static_cast<std::size_t>(i + k)];
      RegDefUse du = reg_def_use(c);
      uses |= du.uses;
      defs |= du.defs;
      defines_flags |= flag_def_use(c).defines != 0;
      b.rule_covered[static_cast<std::size_t>(i + k)] = true;
      b.span[static_cast<std::size_t>(i + k)] = k == 0 ? bind->span : 0;
    }
    for (int r = 12; r < kNumGuestRegs; ++r)
      if (uses & (1u << r)) e.host(h::ld(r, gpr_slot(r)), i, ItemRole::Staging);
    const bool constrained = bind->rule->constrained;
    if (constrained && !area_ccr_fresh) {
      e.sync(SyncKind::Save, ccr_and(0), SyncCause::ConstrainedRule, i);
      area_ccr_fresh = true;
    }
    int end = e.new_label();
    ItemRole role = constrained ? ItemRole::CondTest : ItemRole::Body;
    for (HostInstr hi : instantiate(*bind)) {
      if (hi.op == HostOp::Jcc && hi.target == kTemplateEnd) {
        hi.target = end;
        e.host(hi, i, constrained ? ItemRole::CondBranch : ItemRole::Body);
        role = ItemRole::Body;
        continue;
      }
      e.host(hi, i, role);
    }
    e.place(end);
    for (int r = 12; r < kNumGuestRegs; ++r)
      if (defs & (1u << r)) e.host(h::st(gpr_slot(r), r), i, ItemRole::Staging);
    // After the staging stores: a Full restore clobbers h14.
    if (constrained) e.sync(SyncKind::Restore, ccr_and(0), SyncCause::ConstrainedRule, i);
    if (defines_flags) area_ccr_fresh = false;
    i += bind->span;
  }
  if (!terminated) detail::emit_fallthrough(e, n, true);
  refresh_epilogues(b);
  return b;
}

HostBlock translate_tb_baseline(const std::vector<GuestInstr>& tb) {
  HostBlock b;
  init_block(b, tb, Pipeline::Baseline);
  detail::Emitter e(b);
  e.check();
  const int n = static_cast<int>(tb.size());
  for (int i = 0; i < n; ++i) {
    const GuestInstr& g = tb[static_cast<std::size_t>(i)];
    if (ends_block(g)) {
      detail::emit_terminator(e, i, false, false);
      return b;
    }
    detail::emit_area_body(e, i, g, detail::kBaselineTemps, true);
  }
  detail::emit_fallthrough(e, n, false);
  return b;
}

}  // namespace sdbt
