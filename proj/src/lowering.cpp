// Final lowering of a HostBlock: label resolution, boundary saves, and
// out-of-line stubs that leave the block with a precise guest state.
#include <algorithm>
#include <set>
#include <sstream>

#include "emit.hpp"
#include "sdbt/translator.hpp"

namespace sdbt {

namespace {

bool writes_dst(const HostInstr& i) {
  switch (i.op) {
    case HostOp::Cmp: case HostOp::Jcc: case HostOp::Jmp: case HostOp::St:
    case HostOp::Reg2Flags: case HostOp::Call: case HostOp::Exit:
      return false;
    default:
      return true;
  }
}

bool is_jump(const HostInstr& i) { return i.op == HostOp::Jcc || i.op == HostOp::Jmp; }

// Forward walk tracking which resident registers hold a value newer than
// their state-area slot. `fn(pos, dirty)` sees the state before each item.
template <class Fn>
void walk_dirty(const HostBlock& b, Fn&& fn) {
  const bool resident = b.pipeline == Pipeline::Rules;
  RegMask dirty = 0;
  bool reachable = true;
  std::map<int, RegMask> at_label;
  for (std::size_t p = 0; p < b.items.size(); ++p) {
    const Item& it = b.items[p];
    if (it.kind == ItemKind::Label) {
      auto j = at_label.find(it.label);
      RegMask in = j == at_label.end() ? 0 : j->second;
      dirty = reachable ? static_cast<RegMask>(dirty | in) : in;
      reachable = true;
    }
    fn(p, dirty);
    if (!resident) continue;
    switch (it.kind) {
      case ItemKind::Host:
        if (is_jump(it.host)) {
          at_label[it.host.target] |= dirty;
          if (it.host.op == HostOp::Jmp) reachable = false;
        } else if (writes_dst(it.host) && it.host.dst < kNumResidentRegs) {
          dirty |= static_cast<RegMask>(1u << it.host.dst);
        }
        break;
      case ItemKind::Sync:
        dirty &= static_cast<RegMask>(~it.sync.comps.gprs);
        break;
      case ItemKind::Helper:
        dirty &= static_cast<RegMask>(~reg_def_use(b.tb[static_cast<std::size_t>(it.guest)]).defs);
        break;
      case ItemKind::Exit:
        reachable = false;
        break;
      default:
        break;
    }
  }
}

struct StubPlan {
  std::size_t pos = 0;
  bool interrupt = false;
  RegMask dirty = 0;
};

}  // namespace

void refresh_epilogues(HostBlock& b) {
  std::vector<std::pair<std::size_t, RegMask>> at;
  walk_dirty(b, [&](std::size_t p, RegMask d) {
    const Item& it = b.items[p];
    if (it.kind == ItemKind::Sync && it.sync.cause == SyncCause::TbBoundary) at.emplace_back(p, d);
  });
  for (auto [p, d] : at) b.items[p].sync.comps.gprs = static_cast<RegMask>(d & kResidentMask);
}

LoweredBlock lower_block(const HostBlock& b, const std::map<int, Components>& drop) {
  LoweredBlock out;
  out.exits = b.exits;
  std::vector<StubPlan> stubs;
  walk_dirty(b, [&](std::size_t p, RegMask d) {
    const Item& it = b.items[p];
    if (it.kind == ItemKind::Helper || it.kind == ItemKind::Check)
      stubs.push_back({p, it.kind == ItemKind::Check, d});
  });

  // Position of the last item of every segment, for the executed-set test.
  const int n = static_cast<int>(b.tb.size());
  std::vector<long> last(static_cast<std::size_t>(n), -1);
  for (std::size_t p = 0; p < b.items.size(); ++p) {
    int g = b.items[p].guest;
    if (g >= 0) last[static_cast<std::size_t>(g)] = static_cast<long>(p);
  }

  std::map<int, std::size_t> label_pos;
  std::vector<std::pair<std::size_t, int>> label_fixups;  // code index, label
  std::vector<std::pair<std::size_t, int>> stub_fixups;   // code index, stub number
  std::size_t stub_no = 0;
  auto emit = [&](HostInstr i) { out.code.push_back(i); };

  for (std::size_t p = 0; p < b.items.size(); ++p) {
    const Item& it = b.items[p];
    switch (it.kind) {
      case ItemKind::Host: {
        HostInstr i = it.host;
        if (is_jump(i)) label_fixups.emplace_back(out.code.size(), i.target);
        emit(i);
        break;
      }
      case ItemKind::Sync: {
        SyncOp s = it.sync;
        if (s.cause == SyncCause::TbBoundary && it.exit >= 0) {
          auto d = drop.find(it.exit);
          if (d != drop.end()) s.comps = s.comps.minus(d->second);
        }
        if (s.comps.empty()) break;
        for (const auto& i : lower_sync(s)) emit(i);
        break;
      }
      case ItemKind::Helper:
        stub_fixups.emplace_back(out.code.size(), static_cast<int>(stub_no++));
        emit(it.host);
        break;
      case ItemKind::Check:
        emit(tagged(h::ld(kScratch, Slot::Pending), HostTag::Check));
        emit(tagged(h::cmpi(kScratch, 0), HostTag::Check));
        stub_fixups.emplace_back(out.code.size(), static_cast<int>(stub_no++));
        emit(tagged(h::jcc(Condition::NE, -1), HostTag::Check));
        break;
      case ItemKind::Label:
        label_pos[it.label] = out.code.size();
        break;
      case ItemKind::Exit:
        emit(tagged(h::exit(static_cast<std::uint16_t>(it.exit)), HostTag::Chain));
        break;
    }
  }
  for (auto [at, lbl] : label_fixups) {
    auto j = label_pos.find(lbl);
    if (j == label_pos.end()) throw std::logic_error("lower_block: unplaced label");
    out.code[at].target = static_cast<std::int32_t>(j->second);
  }

  for (std::size_t s = 0; s < stubs.size(); ++s) {
    const StubPlan& sp = stubs[s];
    const Item& site = b.items[sp.pos];
    std::set<int> executed;
    for (int g = 0; g < n; ++g) {
      if (b.span[static_cast<std::size_t>(g)] == 0) continue;
      if (last[static_cast<std::size_t>(g)] >= 0 && static_cast<std::size_t>(last[static_cast<std::size_t>(g)]) < sp.pos) {
        for (int k = 0; k < b.span[static_cast<std::size_t>(g)]; ++k) executed.insert(g + k);
      }
    }
    int resume = sp.interrupt ? (executed.empty() ? 0 : *executed.rbegin() + 1) : site.guest;
    for (int g = 0; g < resume; ++g) {
      if (b.span[static_cast<std::size_t>(g)] == 0 || executed.count(g)) continue;
      // A segment scheduled later than this exit point: replay it here.
      for (const Item& it : b.items) {
        if (it.guest != g) continue;
        if (it.kind != ItemKind::Host || is_jump(it.host))
          throw std::logic_error("lower_block: compensation needs a pure host segment");
      }
    }
    out.code[stub_fixups[s].first].target = static_cast<std::int32_t>(out.code.size());
    RegMask dirty = sp.dirty;
    bool comp_ccr = false;
    for (int g = 0; g < resume; ++g) {
      if (b.span[static_cast<std::size_t>(g)] == 0 || executed.count(g)) continue;
      for (const Item& it : b.items) {
        if (it.guest != g) continue;
        emit(tagged(it.host, HostTag::Translated));
        if (writes_dst(it.host) && it.host.dst < kNumResidentRegs) dirty |= static_cast<RegMask>(1u << it.host.dst);
      }
      for (int k = 0; k < b.span[static_cast<std::size_t>(g)]; ++k)
        comp_ccr |= flag_def_use(b.tb[static_cast<std::size_t>(g + k)]).defines != 0;
    }
    SyncOp save{SyncKind::Save, Components{static_cast<RegMask>(dirty & kResidentMask), comp_ccr, false},
                b.boundary_mode, SyncCause::TbBoundary, 0};
    if (!save.comps.empty()) {
      for (const auto& i : lower_sync(save)) emit(i);
    }
    ExitDesc d = detail::credit(b, resume);
    d.kind = sp.interrupt ? ExitKind::Interrupt : ExitKind::Fault;
    d.target = b.tb[static_cast<std::size_t>(resume)].addr;
    emit(tagged(h::exit(static_cast<std::uint16_t>(out.exits.size())), HostTag::Chain));
    out.exits.push_back(d);
  }
  return out;
}

BlockStats block_stats(const HostBlock& b) {
  BlockStats st;
  for (const Item& it : b.items) {
    if (it.kind != ItemKind::Sync || it.sync.comps.empty()) continue;
    ++st.sync_ops;
    st.sync_instrs += sync_length(it.sync);
    ++st.by_cause[static_cast<int>(it.sync.cause)];
  }
  st.host_instrs = static_cast<int>(lower_block(b).code.size());
  return st;
}

std::string print_block(const HostBlock& b) {
  std::ostringstream os;
  os << "block @" << std::hex << b.guest_pc << std::dec << " (" << b.tb.size() << " guest)\n";
  for (const Item& it : b.items) {
    switch (it.kind) {
      case ItemKind::Host:
        os << "  g" << it.guest << "  " << print_host(it.host) << "\n";
        break;
      case ItemKind::Sync: {
        const auto& s = it.sync;
        os << "  g" << it.guest << "  " << (s.kind == SyncKind::Save ? "save" : "restore")
           << (s.mode == SyncMode::Packed ? ".packed" : ".full") << " {";
        for (int r = 0; r < kNumResidentRegs; ++r)
          if (s.comps.gprs & (1u << r)) os << " r" << r;
        if (s.comps.ccr) os << " ccr";
        if (s.comps.pc) os << " pc";
        os << " } " << sync_cause_name(s.cause) << "\n";
        break;
      }
      case ItemKind::Helper:
        os << "  g" << it.guest << "  " << print_host(it.host) << "\n";
        break;
      case ItemKind::Check:
        os << "  check\n";
        break;
      case ItemKind::Label:
        os << " L" << it.label << ":\n";
        break;
      case ItemKind::Exit:
        os << "  exit " << it.exit << "\n";
        break;
    }
  }
  return os.str();
}

}  // namespace sdbt
