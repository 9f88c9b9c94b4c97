#include "sdbt/optimizer.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace sdbt {

std::string_view opt_level_name(OptLevel l) {
  switch (l) {
    case OptLevel::Base: return "base";
    case OptLevel::Reduction: return "reduction";
    case OptLevel::Elimination: return "elimination";
    case OptLevel::Scheduling: return "scheduling";
  }
  return "?";
}

OptLevel parse_opt_level(std::string_view s) {
  for (OptLevel l : {OptLevel::Base, OptLevel::Reduction, OptLevel::Elimination, OptLevel::Scheduling})
    if (opt_level_name(l) == s) return l;
  throw std::invalid_argument("unknown optimization level '" + std::string(s) + "'");
}

namespace {

const GuestInstr& instr(const HostBlock& b, int g) { return b.tb[static_cast<std::size_t>(g)]; }

bool is_helper_sync(const Item& it) {
  return it.kind == ItemKind::Sync &&
         (it.sync.cause == SyncCause::MemoryAccess || it.sync.cause == SyncCause::SystemLevel);
}

bool needs_full_ccr(const HostBlock& b, const Item& it) {
  if (it.sync.cause == SyncCause::Fallback) return true;
  if (it.sync.cause != SyncCause::SystemLevel || it.guest < 0) return false;
  Mnemonic op = instr(b, it.guest).op;
  return op == Mnemonic::Setcpsr || op == Mnemonic::Getcpsr;
}

void drop_empty_syncs(HostBlock& b) {
  std::erase_if(b.items, [](const Item& it) { return it.kind == ItemKind::Sync && it.sync.comps.empty(); });
}

// A write counts as a kill only when the instruction cannot fault: a fault
// handler may skip the instruction and leave the old value live.
bool kills_reliably(const GuestInstr& g) {
  return g.cond == Condition::AL && classify(g) == Category::RuleEligible;
}

// Flag effects of a whole segment.
struct SegFlags {
  FlagSet uses = 0;
  FlagSet defines = 0;
  bool kills_all = false;
};

SegFlags seg_flags(const HostBlock& b, int g) {
  SegFlags f;
  FlagSet killed = 0;
  int span = std::max(1, b.span[static_cast<std::size_t>(g)]);
  for (int k = 0; k < span; ++k) {
    const GuestInstr& gi = instr(b, g + k);
    FlagDefUse du = flag_def_use(gi);
    f.uses |= du.uses & ~killed;
    f.defines |= du.defines;
    if (kills_reliably(gi)) killed |= du.defines;
  }
  f.kills_all = killed == kAllFlags;
  return f;
}

RegDefUse seg_regs(const HostBlock& b, int g) {
  RegDefUse r;
  int span = std::max(1, b.span[static_cast<std::size_t>(g)]);
  for (int k = 0; k < span; ++k) {
    RegDefUse du = reg_def_use(instr(b, g + k));
    r.uses |= du.uses & ~r.kills;
    r.defs |= du.defs;
    r.kills |= du.kills;
  }
  return r;
}

bool is_flag_store(Slot s) {
  return s == Slot::FlagN || s == Slot::FlagZ || s == Slot::FlagC || s == Slot::FlagV;
}

bool writes_flags(const HostInstr& i) {
  return i.set_flags || i.op == HostOp::Cmp || i.op == HostOp::Reg2Flags;
}

}  // namespace

std::vector<int> segment_order(const HostBlock& b) {
  std::vector<int> order;
  std::set<int> seen;
  for (const Item& it : b.items) {
    if (it.guest < 0 || seen.count(it.guest)) continue;
    seen.insert(it.guest);
    order.push_back(it.guest);
  }
  return order;
}

void pass_reduce(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  // A restore must read the CCR form written last: block boundaries leave
  // the packed form fresh, fallbacks and setcpsr write the flag slots.
  SyncMode fresh = SyncMode::Packed;
  for (Item& it : b.items) {
    if (it.kind == ItemKind::Host && it.host.op == HostOp::St) {
      if (it.host.slot == Slot::CcrPacked) fresh = SyncMode::Packed;
      if (is_flag_store(it.host.slot)) fresh = SyncMode::Full;
    }
    if (it.kind == ItemKind::Helper && instr(b, it.guest).op == Mnemonic::Setcpsr) fresh = SyncMode::Full;
    if (it.kind != ItemKind::Sync || !it.sync.comps.ccr) continue;
    if (it.sync.kind == SyncKind::Save) {
      it.sync.mode = needs_full_ccr(b, it) ? SyncMode::Full : SyncMode::Packed;
      fresh = it.sync.mode;
    } else {
      it.sync.mode = fresh;
    }
  }
  b.boundary_mode = SyncMode::Packed;
}

namespace {

// Rewrites the first constrained site reached with the guest CCR in host
// FLAGS into the direct form. Returns false when there is none.
bool rewrite_first_direct_site(HostBlock& b) {
  // FLAGS hold the guest CCR at block entry.
  bool flags_guest = true;
  for (const Item& it : b.items) {
    bool site = it.guest >= 0 &&
                ((it.kind == ItemKind::Sync && it.sync.cause == SyncCause::ConstrainedRule) ||
                 (it.kind == ItemKind::Host && it.role == ItemRole::CondTest));
    if (site && flags_guest) {
      int g = it.guest;
      std::erase_if(b.items, [g](const Item& x) {
        return x.guest == g && ((x.kind == ItemKind::Host && x.role == ItemRole::CondTest) ||
                                (x.kind == ItemKind::Sync && x.sync.cause == SyncCause::ConstrainedRule));
      });
      for (Item& x : b.items)
        if (x.guest == g && x.kind == ItemKind::Host && x.role == ItemRole::CondBranch) {
          x.host.cond = invert(instr(b, g).cond);
          x.role = ItemRole::Body;
        }
      return true;
    }
    switch (it.kind) {
      case ItemKind::Check:
      case ItemKind::Helper:
        flags_guest = false;
        break;
      case ItemKind::Sync:
        if (it.sync.kind == SyncKind::Restore && it.sync.comps.ccr) flags_guest = true;
        break;
      case ItemKind::Host:
        if (!writes_flags(it.host)) break;
        flags_guest = it.guest >= 0 && it.role == ItemRole::Body && !b.fallback[static_cast<std::size_t>(it.guest)] &&
                      seg_flags(b, it.guest).kills_all;
        break;
      default:
        break;
    }
  }
  return false;
}

}  // namespace

void pass_eliminate_restores(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  while (rewrite_first_direct_site(b)) {
  }
}

void pass_merge_memory(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  auto is_mem_sync = [](const Item& it) {
    return it.kind == ItemKind::Sync && it.sync.cause == SyncCause::MemoryAccess;
  };
  auto is_mem_helper = [](const Item& it) { return it.kind == ItemKind::Helper && it.host.helper == HelperId::Memory; };
  std::vector<Item> out;
  std::size_t p = 0;
  while (p < b.items.size()) {
    // A run: [save] [check] helper [restore] repeated with nothing in between.
    std::size_t q = p;
    std::vector<Item> saves, restores, middle;
    int sites = 0;
    SyncMode mode = SyncMode::Full;
    bool mode_set = false, mixed = false;
    auto note_mode = [&](const Item& s) {
      if (!s.sync.comps.ccr) return;
      if (mode_set && s.sync.mode != mode) mixed = true;
      mode = s.sync.mode;
      mode_set = true;
    };
    while (q < b.items.size()) {
      std::size_t r = q;
      std::vector<Item> site_mid;
      const Item* save = nullptr;
      if (r < b.items.size() && is_mem_sync(b.items[r]) && b.items[r].sync.kind == SyncKind::Save) save = &b.items[r++];
      while (r < b.items.size() && b.items[r].kind == ItemKind::Check) site_mid.push_back(b.items[r++]);
      if (r >= b.items.size() || !is_mem_helper(b.items[r])) break;
      int g = b.items[r].guest;
      if (save && save->guest != g) break;
      site_mid.push_back(b.items[r++]);
      const Item* restore = nullptr;
      if (r < b.items.size() && is_mem_sync(b.items[r]) && b.items[r].sync.kind == SyncKind::Restore &&
          b.items[r].guest == g)
        restore = &b.items[r++];
      if (save) {
        note_mode(*save);
        saves.push_back(*save);
      }
      if (restore) {
        note_mode(*restore);
        restores.push_back(*restore);
      }
      middle.insert(middle.end(), site_mid.begin(), site_mid.end());
      ++sites;
      q = r;
      if (mixed) break;
    }
    if (sites < 2 || mixed) {
      out.push_back(b.items[p]);
      ++p;
      continue;
    }
    Item save;
    save.kind = ItemKind::Sync;
    save.sync = SyncOp{SyncKind::Save, {}, mode, SyncCause::MemoryAccess, 0};
    for (const Item& s : saves) save.sync.comps = save.sync.comps | s.sync.comps;
    Item restore = save;
    restore.sync.kind = SyncKind::Restore;
    restore.sync.comps = {};
    for (const Item& s : restores) restore.sync.comps = restore.sync.comps | s.sync.comps;
    for (auto it = middle.rbegin(); it != middle.rend(); ++it)
      if (it->kind == ItemKind::Helper) {
        restore.guest = it->guest;
        break;
      }
    for (const Item& m : middle)
      if (m.kind == ItemKind::Helper) {
        save.guest = m.guest;
        break;
      }
    if (!save.sync.comps.empty()) out.push_back(save);
    out.insert(out.end(), middle.begin(), middle.end());
    if (!restore.sync.comps.empty()) out.push_back(restore);
    p = q;
  }
  b.items = std::move(out);
}

TbSummary summarize(const HostBlock& b) {
  TbSummary s;
  FlagSet killed_flags = 0;
  bool ccr_live = false;
  RegMask killed = 0, used = 0;
  for (int g : segment_order(b)) {
    int span = std::max(1, b.span[static_cast<std::size_t>(g)]);
    for (int k = 0; k < span; ++k) {
      const GuestInstr& gi = instr(b, g + k);
      FlagDefUse fu = flag_def_use(gi);
      if (fu.uses & ~killed_flags) ccr_live = true;
      if (kills_reliably(gi)) killed_flags |= fu.defines;
      RegDefUse ru = reg_def_use(gi);
      used |= ru.uses & ~killed;
      if (kills_reliably(gi)) killed |= ru.kills & ~used;
    }
  }
  s.ccr_killed = !ccr_live && killed_flags == kAllFlags;
  s.gprs_killed = static_cast<RegMask>(killed & kResidentMask);
  return s;
}

Components edge_drop(const TbSummary& t) { return Components{t.gprs_killed, t.ccr_killed, false}; }

std::map<std::pair<int, int>, Components> pass_inter_tb(const ChainGraph& g) {
  std::map<std::pair<int, int>, Components> out;
  for (const auto& e : g.edges) {
    const HostBlock* to = g.nodes.at(static_cast<std::size_t>(e.to));
    if (to->pipeline != Pipeline::Rules) continue;
    out[{e.from, e.exit}] = edge_drop(summarize(*to));
  }
  return out;
}

void pass_inter_tb_entry(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  if (!summarize(b).ccr_killed) return;
  std::erase_if(b.items, [](const Item& it) {
    return it.kind == ItemKind::Sync && it.sync.cause == SyncCause::InterruptCheck;
  });
}

void pass_trim_dead_ccr(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  std::vector<int> order = segment_order(b);
  std::map<int, bool> live_before, live_after;
  bool live = true;  // exits save the CCR
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    live_after[*it] = live;
    SegFlags f = seg_flags(b, *it);
    live = f.uses != 0 || (live && !f.kills_all);
    live_before[*it] = live;
  }
  for (Item& it : b.items) {
    if (!is_helper_sync(it) || !it.sync.comps.ccr || needs_full_ccr(b, it)) continue;
    bool needed = it.sync.kind == SyncKind::Save ? live_before[it.guest] : live_after[it.guest];
    if (!needed) it.sync.comps.ccr = false;
  }
  drop_empty_syncs(b);
}

namespace {

// True when the segment consists of plain host instructions only.
bool pure_segment(const HostBlock& b, int g) {
  for (const Item& it : b.items) {
    if (it.guest != g) continue;
    if (it.kind != ItemKind::Host) return false;
    if (it.host.op == HostOp::Jcc || it.host.op == HostOp::Jmp) return false;
    if (it.role == ItemRole::CondTest || it.role == ItemRole::CondBranch) return false;
  }
  return true;
}

bool segment_has_sync_or_helper(const HostBlock& b, int g) {
  for (const Item& it : b.items)
    if (it.guest == g && (it.kind == ItemKind::Sync || it.kind == ItemKind::Helper)) return true;
  return false;
}

}  // namespace

void pass_schedule_dbu(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  bool moved = true;
  for (int guard = 0; moved && guard < 64; ++guard) {
    moved = false;
    std::vector<int> order = segment_order(b);
    for (std::size_t di = 0; di < order.size() && !moved; ++di) {
      int d = order[di];
      const GuestInstr& dg = instr(b, d);
      if (b.span[static_cast<std::size_t>(d)] != 1 || !b.rule_covered[static_cast<std::size_t>(d)]) continue;
      if (dg.cond != Condition::AL || flag_def_use(dg).defines != kAllFlags) continue;
      if (!pure_segment(b, d)) continue;
      // The first later segment touching flags must read them.
      std::size_t ui = di + 1;
      while (ui < order.size()) {
        SegFlags f = seg_flags(b, order[ui]);
        if (f.uses || f.defines) break;
        ++ui;
      }
      if (ui >= order.size() || ui == di + 1) continue;
      if (!seg_flags(b, order[ui]).uses) continue;
      RegDefUse dr = seg_regs(b, d);
      bool legal = true, useful = false;
      for (std::size_t k = di + 1; k < ui && legal; ++k) {
        int s = order[k];
        if (b.fallback[static_cast<std::size_t>(s)]) legal = false;
        RegDefUse sr = seg_regs(b, s);
        if (sr.defs & (dr.uses | dr.defs)) legal = false;
        if (sr.uses & dr.defs) legal = false;
        useful |= segment_has_sync_or_helper(b, s);
      }
      if (!legal || !useful) continue;
      std::vector<Item> seg;
      for (const Item& it : b.items)
        if (it.guest == d) seg.push_back(it);
      std::erase_if(b.items, [d](const Item& it) { return it.guest == d; });
      int u = order[ui];
      auto at = std::find_if(b.items.begin(), b.items.end(), [u](const Item& it) { return it.guest == u; });
      // Keep a constrained save or staging of U after D: insert before U's
      // first item.
      b.items.insert(at, seg.begin(), seg.end());
      moved = true;
    }
  }
  pass_trim_dead_ccr(b);
}

void pass_schedule_irq(HostBlock& b) {
  if (b.pipeline != Pipeline::Rules) return;
  auto check = std::find_if(b.items.begin(), b.items.end(), [](const Item& it) { return it.kind == ItemKind::Check; });
  if (check == b.items.end() || check != b.items.begin()) return;
  auto site = std::find_if(b.items.begin(), b.items.end(), [](const Item& it) {
    return it.kind == ItemKind::Helper && it.host.helper == HelperId::Memory;
  });
  if (site == b.items.end()) return;
  Item c = *check;
  std::size_t site_pos = static_cast<std::size_t>(site - b.items.begin());
  b.items.erase(b.items.begin());
  --site_pos;
  b.items.insert(b.items.begin() + static_cast<std::ptrdiff_t>(site_pos), c);
  std::erase_if(b.items, [](const Item& it) {
    return it.kind == ItemKind::Sync && it.sync.cause == SyncCause::InterruptCheck;
  });
}

void run_pipeline(HostBlock& b, OptLevel level) {
  if (b.pipeline != Pipeline::Rules) return;
  for (int round = 0; round < 16; ++round) {
    HostBlock before = b;
    if (level >= OptLevel::Reduction) pass_reduce(b);
    if (level >= OptLevel::Elimination) {
      pass_eliminate_restores(b);
      pass_merge_memory(b);
      pass_inter_tb_entry(b);
    }
    if (level >= OptLevel::Scheduling) {
      pass_schedule_dbu(b);
      pass_schedule_irq(b);
    }
    refresh_epilogues(b);
    if (b == before) return;
  }
  throw std::logic_error("run_pipeline did not reach a fixed point");
}

}  // namespace sdbt
