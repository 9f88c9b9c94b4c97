#include "sdbt/machine.hpp"

#include <algorithm>

namespace sdbt {

std::uint32_t GuestState::cpsr() const {
  std::uint32_t v = static_cast<std::uint32_t>(nzcv & 0xF) << 28;
  if (irq_masked) v |= kCpsrIrqMask;
  if (mode == Mode::Privileged) v |= kCpsrPrivileged;
  return v;
}

void GuestState::set_cpsr(std::uint32_t value) {
  nzcv = static_cast<std::uint8_t>(value >> 28);
  irq_masked = (value & kCpsrIrqMask) != 0;
  mode = (value & kCpsrPrivileged) ? Mode::Privileged : Mode::User;
}

std::uint8_t PhysMemory::read8(std::uint32_t pa) const {
  auto it = pages_.find(pa / kPageSize);
  return it == pages_.end() ? 0 : (*it->second)[pa % kPageSize];
}

void PhysMemory::write8(std::uint32_t pa, std::uint8_t value) {
  auto& page = pages_[pa / kPageSize];
  if (!page) {
    if (value == 0) {
      pages_.erase(pa / kPageSize);
      return;
    }
    page = std::make_shared<Page>();
    page->fill(0);
  } else if (page.use_count() > 1) {
    page = std::make_shared<Page>(*page);  // copy on write after a snapshot copy
  }
  (*page)[pa % kPageSize] = value;
}

std::uint32_t PhysMemory::read32(std::uint32_t pa) const {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | read8(pa + static_cast<std::uint32_t>(i));
  return v;
}

void PhysMemory::write32(std::uint32_t pa, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) write8(pa + static_cast<std::uint32_t>(i), static_cast<std::uint8_t>(value >> (8 * i)));
}

std::map<std::uint32_t, std::uint32_t> PhysMemory::nonzero_words() const {
  std::map<std::uint32_t, std::uint32_t> out;
  for (const auto& [num, page] : pages_) {
    for (std::uint32_t off = 0; off < kPageSize; off += 4) {
      std::uint32_t pa = num * kPageSize + off;
      if (std::uint32_t w = read32(pa)) out[pa] = w;
    }
  }
  return out;
}

bool PhysMemory::same_contents(const PhysMemory& other) const {
  return nonzero_words() == other.nonzero_words();
}

Translation page_walk(std::uint32_t gva, Access access, std::uint32_t root, const PhysMemory& mem) {
  Translation t;
  t.fault = PageFault{PageFault::Kind::NotMapped, gva, access};
  std::uint32_t l1 = mem.read32(root + (gva >> 22) * 4);
  if (!(l1 & kPteValid)) return t;
  std::uint32_t l2 = mem.read32((l1 & ~0xFFFu) + ((gva >> 12) & 0x3FF) * 4);
  if (!(l2 & kPteValid)) return t;
  if (access == Access::Write && !(l2 & kPteWritable)) {
    t.fault.kind = PageFault::Kind::Protection;
    return t;
  }
  t.gpa = (l2 & ~0xFFFu) | (gva & 0xFFF);
  return t;
}

PageTableBuilder::PageTableBuilder(PhysMemory& mem, std::uint32_t table_region)
    : mem_(mem), next_(table_region & ~0xFFFu) {
  root_ = alloc_table();
}

std::uint32_t PageTableBuilder::alloc_table() {
  std::uint32_t base = next_;
  next_ += kPageSize;
  return base;
}

void PageTableBuilder::map(std::uint32_t gva_page, std::uint32_t frame_base, bool writable) {
  std::uint32_t l1_addr = root_ + (gva_page >> 22) * 4;
  std::uint32_t l1 = mem_.read32(l1_addr);
  if (!(l1 & kPteValid)) {
    l1 = alloc_table() | kPteValid;
    mem_.write32(l1_addr, l1);
  }
  std::uint32_t l2_addr = (l1 & ~0xFFFu) + ((gva_page >> 12) & 0x3FF) * 4;
  mem_.write32(l2_addr, (frame_base & ~0xFFFu) | kPteValid | (writable ? kPteWritable : 0));
}

void PageTableBuilder::identity(std::uint32_t begin, std::uint32_t end, bool writable) {
  for (std::uint64_t p = begin & ~0xFFFu; p < end; p += kPageSize) {
    map(static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p), writable);
  }
}

void Tlb::flush() {
  for (auto& e : entries_) e.valid = false;
}

Translation tlb_lookup_or_fill(std::uint32_t gva, Access access, Tlb& tlb, std::uint32_t root,
                               const PhysMemory& mem) {
  Tlb::Entry& e = tlb.slot(gva);
  std::uint32_t vpage = gva >> 12;
  if (e.valid && e.vpage == vpage) {
    ++tlb.hits;
    Translation t;
    if (access == Access::Write && !e.writable) {
      t.fault = PageFault{PageFault::Kind::Protection, gva, access};
      return t;
    }
    t.gpa = e.frame | (gva & 0xFFF);
    return t;
  }
  ++tlb.misses;
  // Fill from a read walk so that a write-protected page is still cached.
  Translation probe = page_walk(gva, Access::Read, root, mem);
  if (!probe.ok()) {
    probe.fault.access = access;
    return probe;
  }
  Translation w = page_walk(gva, Access::Write, root, mem);
  e = Tlb::Entry{vpage, *probe.gpa & ~0xFFFu, w.ok(), true};
  if (access == Access::Write && !w.ok()) return w;
  return probe;
}

InterruptController::InterruptController(std::vector<InterruptEvent> schedule)
    : schedule_(std::move(schedule)) {
  std::stable_sort(schedule_.begin(), schedule_.end(),
                   [](const InterruptEvent& a, const InterruptEvent& b) { return a.count < b.count; });
}

std::optional<int> InterruptController::pending(std::uint64_t retired) const {
  if (next_ < schedule_.size() && schedule_[next_].count <= retired) return schedule_[next_].vector;
  return std::nullopt;
}

std::optional<std::uint64_t> InterruptController::next_trigger() const {
  if (next_ < schedule_.size()) return schedule_[next_].count;
  return std::nullopt;
}

void enter_exception(GuestState& state, int vector, std::uint32_t return_pc,
                     const HandlerTable& handlers) {
  auto it = handlers.find(vector);
  if (it == handlers.end()) throw UnconfiguredVector(vector);
  state.sysreg(SysReg::Spsr) = state.cpsr();
  state.sysreg(SysReg::Elr) = return_pc;
  state.mode = Mode::Privileged;
  state.irq_masked = true;
  state.pc = it->second;
}

void exception_return(GuestState& state) {
  state.set_cpsr(state.sysreg(SysReg::Spsr));
  state.pc = state.sysreg(SysReg::Elr);
}

bool deliver_interrupt(Machine& machine, std::uint64_t retired) {
  if (machine.state.irq_masked) return false;
  auto vector = machine.irq.pending(retired);
  if (!vector) return false;
  enter_exception(machine.state, *vector, machine.state.pc, machine.handlers);
  machine.irq.service();
  return true;
}

Slot flag_slot(FlagSet flag) {
  switch (flag) {
    case kFlagN: return Slot::FlagN;
    case kFlagZ: return Slot::FlagZ;
    case kFlagC: return Slot::FlagC;
    case kFlagV: return Slot::FlagV;
    default: throw std::invalid_argument("flag_slot: not a single flag");
  }
}

std::uint8_t EmuStateArea::flags_from_slots() const {
  std::uint8_t v = 0;
  if (get(Slot::FlagN)) v |= kFlagN;
  if (get(Slot::FlagZ)) v |= kFlagZ;
  if (get(Slot::FlagC)) v |= kFlagC;
  if (get(Slot::FlagV)) v |= kFlagV;
  return v;
}

void EmuStateArea::set_flag_slots(std::uint8_t nzcv) {
  set(Slot::FlagN, (nzcv & kFlagN) ? 1 : 0);
  set(Slot::FlagZ, (nzcv & kFlagZ) ? 1 : 0);
  set(Slot::FlagC, (nzcv & kFlagC) ? 1 : 0);
  set(Slot::FlagV, (nzcv & kFlagV) ? 1 : 0);
}

void EmuStateArea::set_ccr_coherent(std::uint8_t nzcv) {
  set_flag_slots(nzcv);
  set(Slot::CcrPacked, nzcv & 0xF);
  std::uint64_t s = clock_;
  for (Slot f : {Slot::FlagN, Slot::FlagZ, Slot::FlagC, Slot::FlagV}) stamps_[idx(f)] = s;
}

bool EmuStateArea::packed_fresh() const {
  std::uint64_t p = stamp(Slot::CcrPacked);
  for (Slot f : {Slot::FlagN, Slot::FlagZ, Slot::FlagC, Slot::FlagV}) {
    if (stamp(f) > p) return false;
  }
  return true;
}

bool EmuStateArea::flags_fresh() const {
  std::uint64_t p = stamp(Slot::CcrPacked);
  for (Slot f : {Slot::FlagN, Slot::FlagZ, Slot::FlagC, Slot::FlagV}) {
    if (stamp(f) < p) return false;
  }
  return true;
}

std::uint8_t EmuStateArea::current_ccr() const {
  if (flags_fresh()) return flags_from_slots();
  return static_cast<std::uint8_t>(get(Slot::CcrPacked) & 0xF);
}

void load_state(const GuestState& g, EmuStateArea& area, SystemState& sys) {
  for (int i = 0; i < kNumGuestRegs; ++i) area.set_gpr(i, g.r[static_cast<std::size_t>(i)]);
  area.set(Slot::Pc, g.pc);
  area.set_ccr_coherent(g.nzcv);
  sys.mode = g.mode;
  sys.irq_masked = g.irq_masked;
  sys.sysregs = g.sysregs;
}

GuestState materialize_state(const EmuStateArea& area, const SystemState& sys, std::uint32_t pc) {
  GuestState g;
  for (int i = 0; i < kNumGuestRegs; ++i) g.r[static_cast<std::size_t>(i)] = area.gpr(i);
  g.pc = pc;
  g.nzcv = area.current_ccr();
  g.mode = sys.mode;
  g.irq_masked = sys.irq_masked;
  g.sysregs = sys.sysregs;
  return g;
}

namespace {

std::uint32_t cpsr_of(std::uint8_t nzcv, const SystemState& sys) {
  GuestState g;
  g.nzcv = nzcv;
  g.mode = sys.mode;
  g.irq_masked = sys.irq_masked;
  return g.cpsr();
}

}  // namespace

HelperResult helper_system(const GuestInstr& instr, EmuStateArea& area, SystemState& sys, Tlb* tlb) {
  HelperResult res;
  res.cost = kHelperCostSystem;
  if (is_privileged(instr.op) && sys.mode != Mode::Privileged) {
    res.status = HelperResult::Status::PrivilegeFault;
    return res;
  }
  switch (instr.op) {
    case Mnemonic::Vmsr:
      sys.sysregs[static_cast<int>(instr.sysreg)] = area.gpr(instr.rn);
      break;
    case Mnemonic::Vmrs:
      area.set_gpr(instr.rd, sys.sysregs[static_cast<int>(instr.sysreg)]);
      break;
    case Mnemonic::Setcpsr: {
      GuestState g;
      g.set_cpsr(area.gpr(instr.rn));
      area.set_flag_slots(g.nzcv);
      sys.mode = g.mode;
      sys.irq_masked = g.irq_masked;
      break;
    }
    case Mnemonic::Getcpsr:
      area.set_gpr(instr.rd, cpsr_of(area.flags_from_slots(), sys));
      break;
    case Mnemonic::Tlbi:
      if (tlb) tlb->flush();
      res.tlb_flushed = true;
      break;
    default:
      throw std::invalid_argument("helper_system: not a system instruction");
  }
  return res;
}

std::uint32_t effective_address(const GuestInstr& instr, std::uint32_t base) {
  return base + static_cast<std::uint32_t>(instr.imm);
}

HelperResult helper_memory(const GuestInstr& instr, EmuStateArea& area, const SystemState& sys,
                           MemoryEnv env) {
  HelperResult res;
  res.cost = kHelperCostTlbHit;
  std::uint32_t gva = effective_address(instr, area.gpr(instr.rn));
  Access access = instr.op == Mnemonic::Str ? Access::Write : Access::Read;
  if (gva & 3) {
    res.status = HelperResult::Status::PageFault;
    res.fault = PageFault{PageFault::Kind::Alignment, gva, access};
    return res;
  }
  std::uint32_t root = sys.sysregs[static_cast<int>(SysReg::Ttbr)];
  Translation t;
  if (env.tlb) {
    std::uint64_t misses = env.tlb->misses;
    t = tlb_lookup_or_fill(gva, access, *env.tlb, root, env.mem);
    if (env.tlb->misses != misses) res.cost += kHelperCostWalk;
  } else {
    t = page_walk(gva, access, root, env.mem);
    res.cost += kHelperCostWalk;
  }
  if (!t.ok()) {
    res.status = HelperResult::Status::PageFault;
    res.fault = t.fault;
    return res;
  }
  if (access == Access::Write) {
    env.mem.write32(*t.gpa, area.gpr(instr.rd));
  } else {
    area.set_gpr(instr.rd, env.mem.read32(*t.gpa));
  }
  return res;
}

}  // namespace sdbt
