#include "emit.hpp"

namespace sdbt::detail {

void Emitter::host(HostInstr i, int guest, ItemRole role) {
  Item it;
  it.kind = ItemKind::Host;
  it.role = role;
  it.host = i;
  it.guest = guest;
  b_.items.push_back(it);
}

void Emitter::sync(SyncKind kind, Components c, SyncCause cause, int guest, SyncMode mode) {
  if (c.empty()) return;
  Item it;
  it.kind = ItemKind::Sync;
  it.sync = SyncOp{kind, c, mode, cause, 0};
  it.guest = guest;
  b_.items.push_back(it);
}

void Emitter::helper(HelperId id, int guest) {
  Item it;
  it.kind = ItemKind::Helper;
  it.host = tagged(h::call(id, static_cast<std::uint16_t>(guest)), HostTag::Helper);
  it.guest = guest;
  b_.items.push_back(it);
}

void Emitter::check() {
  Item it;
  it.kind = ItemKind::Check;
  b_.items.push_back(it);
}

void Emitter::place(int label) {
  Item it;
  it.kind = ItemKind::Label;
  it.label = label;
  b_.items.push_back(it);
}

void Emitter::exit(const ExitDesc& d, int guest, bool epilogue) {
  int idx = static_cast<int>(b_.exits.size());
  b_.exits.push_back(d);
  if (epilogue) {
    Item s;
    s.kind = ItemKind::Sync;
    s.sync = SyncOp{SyncKind::Save, Components{0, true, false}, SyncMode::Full, SyncCause::TbBoundary, 0};
    s.guest = guest;
    s.exit = idx;
    b_.items.push_back(s);
  }
  Item it;
  it.kind = ItemKind::Exit;
  it.guest = guest;
  it.exit = idx;
  b_.items.push_back(it);
}

void emit_slot_cond_jump(Emitter& e, int guest, Condition cond, int label, const Temps& t) {
  switch (cond) {
    case Condition::AL:
      e.host(h::jmp(label), guest);
      return;
    case Condition::EQ:
    case Condition::NE:
      e.host(h::ld(t[3], Slot::FlagZ), guest);
      e.host(h::cmpi(t[3], 0), guest);
      e.host(h::jcc(cond == Condition::EQ ? Condition::NE : Condition::EQ, label), guest);
      return;
    case Condition::GE:
    case Condition::LT:
      e.host(h::ld(t[2], Slot::FlagN), guest);
      e.host(h::ld(t[3], Slot::FlagV), guest);
      e.host(h::cmp(t[2], t[3]), guest);
      e.host(h::jcc(cond == Condition::GE ? Condition::EQ : Condition::NE, label), guest);
      return;
  }
}

void emit_area_body(Emitter& e, int guest, const GuestInstr& g, const Temps& t, bool store_pc) {
  if (store_pc) e.host(h::sti(Slot::Pc, static_cast<std::int32_t>(g.addr)), guest);
  Category cat = classify(g);
  if (cat == Category::MemoryAccess) {
    e.helper(HelperId::Memory, guest);
    return;
  }
  if (cat == Category::SystemLevel) {
    e.helper(HelperId::System, guest);
    return;
  }
  int skip = -1;
  if (g.cond != Condition::AL) {
    skip = e.new_label();
    emit_slot_cond_jump(e, guest, invert(g.cond), skip, t);
  }
  FlagSet defs = flag_def_use(g).defines;
  if (defs != 0 && defs != kAllFlags) {
    // Partial definition: the untouched flags must already be in FLAGS.
    for (HostInstr i : lower_sync(SyncOp{SyncKind::Restore, Components{0, true, false}, SyncMode::Full,
                                         SyncCause::Fallback, 0})) {
      i.tag = HostTag::Translated;
      i.sync_start = false;
      e.host(i, guest);
    }
  }
  bool f = g.sets_flags;
  auto src_into = [&](int dst) {
    if (g.has_imm) return false;
    e.host(h::ld(dst, gpr_slot(g.rm)), guest);
    return true;
  };
  switch (g.op) {
    case Mnemonic::Mov:
      if (src_into(t[0])) {
        e.host(h::mov(t[0], t[0], f), guest);
      } else {
        e.host(h::movi(t[0], g.imm, f), guest);
      }
      break;
    case Mnemonic::Mvn:
      if (!src_into(t[0])) e.host(h::movi(t[0], g.imm), guest);
      e.host(h::alui(HostOp::Xor, t[0], t[0], -1, f), guest);
      break;
    case Mnemonic::Cmp:
      e.host(h::ld(t[0], gpr_slot(g.rn)), guest);
      if (src_into(t[1])) {
        e.host(h::cmp(t[0], t[1]), guest);
      } else {
        e.host(h::cmpi(t[0], g.imm), guest);
      }
      break;
    default: {
      HostOp op = host_op_for(g.op);
      e.host(h::ld(t[0], gpr_slot(g.rn)), guest);
      if (src_into(t[1])) {
        e.host(h::alu(op, t[0], t[0], t[1], f), guest);
      } else {
        e.host(h::alui(op, t[0], t[0], g.imm, f), guest);
      }
      break;
    }
  }
  if (g.op != Mnemonic::Cmp) e.host(h::st(gpr_slot(g.rd), t[0]), guest);
  for (FlagSet fl : {kFlagN, kFlagZ, kFlagC, kFlagV}) {
    if (!(defs & fl)) continue;
    e.host(h::flagext(t[1], fl), guest);
    e.host(h::st(flag_slot(fl), t[1]), guest);
  }
  if (skip >= 0) e.place(skip);
}

ExitDesc credit(const HostBlock& b, int count) {
  ExitDesc d;
  d.retired = static_cast<std::uint32_t>(count);
  for (int k = 0; k < count; ++k) {
    const GuestInstr& g = b.tb[static_cast<std::size_t>(k)];
    Category c = classify(g);
    if (c == Category::MemoryAccess) ++d.memory;
    if (c == Category::SystemLevel) ++d.system;
    // Branches are emitted natively by the rules translator, never by fallback.
    bool native_branch = c == Category::Branch && b.pipeline == Pipeline::Rules;
    if (native_branch || b.rule_covered[static_cast<std::size_t>(k)]) ++d.rule_covered;
  }
  return d;
}

void emit_fallthrough(Emitter& e, int idx, bool epilogue) {
  const HostBlock& b = e.block();
  ExitDesc d = credit(b, idx);
  d.kind = ExitKind::Direct;
  d.target = b.tb[static_cast<std::size_t>(idx - 1)].addr + 4;
  d.chainable = true;
  e.exit(d, idx - 1, epilogue);
}

void emit_terminator(Emitter& e, int idx, bool flags_in_host, bool epilogue) {
  const HostBlock& b = e.block();
  const GuestInstr g = b.tb[static_cast<std::size_t>(idx)];
  if (g.op == Mnemonic::Halt || g.op == Mnemonic::Svc) {
    ExitDesc d = credit(b, g.op == Mnemonic::Halt ? idx : idx + 1);
    d.kind = g.op == Mnemonic::Halt ? ExitKind::Halt : ExitKind::Svc;
    d.target = g.addr;
    e.exit(d, idx, epilogue);
    return;
  }
  ExitDesc taken = credit(b, idx + 1);
  if (g.op == Mnemonic::Bx) {
    taken.kind = ExitKind::Indirect;
    taken.reg = g.rn;
  } else {
    taken.kind = ExitKind::Direct;
    taken.target = g.target;
    taken.chainable = true;
  }
  if (g.cond != Condition::AL) {
    int lbl = e.new_label();
    if (flags_in_host) {
      e.host(h::jcc(g.cond, lbl), idx);
    } else {
      emit_slot_cond_jump(e, idx, g.cond, lbl, kBaselineTemps);
    }
    ExitDesc fall = credit(b, idx + 1);
    fall.kind = ExitKind::Direct;
    fall.target = g.addr + 4;
    fall.chainable = true;
    e.exit(fall, idx, epilogue);
    e.place(lbl);
  }
  if (g.op == Mnemonic::Bl) e.host(h::sti(gpr_slot(kLinkReg), static_cast<std::int32_t>(g.addr + 4)), idx);
  e.exit(taken, idx, epilogue);
}

}  // namespace sdbt::detail
