// Guest machine model: architectural state, physical memory, two-level page
// table with a software TLB, the interrupt controller, and the emulator-side
// state area that helpers operate on.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdbt/guest_isa.hpp"

namespace sdbt {

enum class Mode : std::uint8_t { User, Privileged };

// cpsr layout: NZCV in bits 31..28, I (interrupt mask) in bit 7, M in bit 0.
inline constexpr std::uint32_t kCpsrIrqMask = 1u << 7;
inline constexpr std::uint32_t kCpsrPrivileged = 1u;

// Fixed exception vectors; interrupt and svc vectors are workload-defined.
inline constexpr int kVectorDataAbort = 1;
inline constexpr int kVectorUndefined = 2;

struct GuestState {
  std::array<std::uint32_t, kNumGuestRegs> r{};
  std::uint32_t pc = 0;
  std::uint8_t nzcv = 0;
  Mode mode = Mode::User;
  bool irq_masked = false;
  std::array<std::uint32_t, kNumSysRegs> sysregs{};

  std::uint32_t cpsr() const;
  void set_cpsr(std::uint32_t value);
  std::uint32_t& sysreg(SysReg s) { return sysregs[static_cast<int>(s)]; }
  std::uint32_t sysreg(SysReg s) const { return sysregs[static_cast<int>(s)]; }

  friend bool operator==(const GuestState&, const GuestState&) = default;
};

inline constexpr std::uint32_t kPageSize = 4096;

// Sparse byte-addressed physical memory; untouched pages read as zero.
class PhysMemory {
 public:
  std::uint32_t read32(std::uint32_t pa) const;
  void write32(std::uint32_t pa, std::uint32_t value);
  std::uint8_t read8(std::uint32_t pa) const;
  void write8(std::uint32_t pa, std::uint8_t value);

  // Equality up to zero pages.
  bool same_contents(const PhysMemory& other) const;
  std::size_t page_count() const { return pages_.size(); }
  // Non-zero words, for diagnostics and reports.
  std::map<std::uint32_t, std::uint32_t> nonzero_words() const;

 private:
  using Page = std::array<std::uint8_t, kPageSize>;
  std::unordered_map<std::uint32_t, std::shared_ptr<Page>> pages_;
};

enum class Access : std::uint8_t { Read, Write, Exec };

struct PageFault {
  enum class Kind : std::uint8_t { NotMapped, Protection, Alignment };
  Kind kind = Kind::NotMapped;
  std::uint32_t gva = 0;
  Access access = Access::Read;
  friend bool operator==(const PageFault&, const PageFault&) = default;
};

struct Translation {
  std::optional<std::uint32_t> gpa;
  PageFault fault;
  bool ok() const { return gpa.has_value(); }
};

// Two-level table over a 32-bit space: 10-bit L1 index, 10-bit L2 index,
// 4 KiB pages. L1 entry: bit0 valid, bits 31..12 physical base of the L2
// table. L2 entry: bit0 valid, bit1 writable, bits 31..12 frame base.
inline constexpr std::uint32_t kPteValid = 1;
inline constexpr std::uint32_t kPteWritable = 2;

Translation page_walk(std::uint32_t gva, Access access, std::uint32_t root, const PhysMemory& mem);

// Builds page tables inside physical memory, allocating table pages from a
// bump region.
class PageTableBuilder {
 public:
  PageTableBuilder(PhysMemory& mem, std::uint32_t table_region);
  std::uint32_t root() const { return root_; }
  void map(std::uint32_t gva_page, std::uint32_t frame_base, bool writable);
  void identity(std::uint32_t begin, std::uint32_t end, bool writable = true);

 private:
  std::uint32_t alloc_table();
  PhysMemory& mem_;
  std::uint32_t next_;
  std::uint32_t root_;
};

class Tlb {
 public:
  static constexpr int kEntries = 64;
  struct Entry {
    std::uint32_t vpage = 0;
    std::uint32_t frame = 0;
    bool writable = false;
    bool valid = false;
  };

  void flush();
  const Entry& slot(std::uint32_t gva) const { return entries_[(gva >> 12) % kEntries]; }
  Entry& slot(std::uint32_t gva) { return entries_[(gva >> 12) % kEntries]; }

  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

 private:
  std::array<Entry, kEntries> entries_{};
};

Translation tlb_lookup_or_fill(std::uint32_t gva, Access access, Tlb& tlb, std::uint32_t root,
                               const PhysMemory& mem);

struct InterruptEvent {
  std::uint64_t count = 0;  // retired-instruction trigger
  int vector = 0;
};

class InterruptController {
 public:
  InterruptController() = default;
  explicit InterruptController(std::vector<InterruptEvent> schedule);

  // Vector of the oldest unserviced trigger at or below `retired`.
  std::optional<int> pending(std::uint64_t retired) const;
  void service() { ++next_; }
  std::size_t serviced() const { return next_; }
  const std::vector<InterruptEvent>& schedule() const { return schedule_; }
  std::optional<std::uint64_t> next_trigger() const;

 private:
  std::vector<InterruptEvent> schedule_;
  std::size_t next_ = 0;
};

class UnconfiguredVector : public std::runtime_error {
 public:
  explicit UnconfiguredVector(int vector)
      : std::runtime_error("no handler configured for vector " + std::to_string(vector)),
        vector_(vector) {}
  int vector() const noexcept { return vector_; }

 private:
  int vector_;
};

using HandlerTable = std::map<int, std::uint32_t>;

// Exception entry shared by interrupts, faults and svc.
void enter_exception(GuestState& state, int vector, std::uint32_t return_pc,
                     const HandlerTable& handlers);
// svc in Privileged mode: cpsr := spsr, pc := elr.
void exception_return(GuestState& state);

struct Machine {
  GuestState state;
  PhysMemory mem;
  InterruptController irq;
  HandlerTable handlers;
};

// Delivers the oldest pending interrupt if one is due and unmasked.
bool deliver_interrupt(Machine& machine, std::uint64_t retired);

// Slots of the emulator-side copy of guest CPU state.
enum class Slot : std::uint8_t {
  R0 = 0,
  R14 = 14,
  FlagN = 15, FlagZ, FlagC, FlagV,
  Pc,
  CcrPacked,
  Pending,
  Spill0, Spill1,
  Count,
};
inline constexpr int kNumSlots = static_cast<int>(Slot::Count);

inline Slot gpr_slot(int reg) { return static_cast<Slot>(reg); }
Slot flag_slot(FlagSet flag);

// Per-slot write stamps let the runtime tell which CCR representation is the
// newest (one-to-many state: the packed slot vs. the four flag slots).
class EmuStateArea {
 public:
  std::uint32_t get(Slot s) const { return slots_[idx(s)]; }
  void set(Slot s, std::uint32_t v) {
    slots_[idx(s)] = v;
    stamps_[idx(s)] = ++clock_;
  }
  std::uint32_t gpr(int reg) const { return get(gpr_slot(reg)); }
  void set_gpr(int reg, std::uint32_t v) { set(gpr_slot(reg), v); }

  std::uint8_t flags_from_slots() const;
  void set_flag_slots(std::uint8_t nzcv);
  // Writes both representations with the same stamp.
  void set_ccr_coherent(std::uint8_t nzcv);

  bool packed_fresh() const;  // packed slot at least as new as every flag slot
  bool flags_fresh() const;   // every flag slot at least as new as the packed slot
  std::uint8_t current_ccr() const;

  std::uint64_t stamp(Slot s) const { return stamps_[idx(s)]; }
  friend bool operator==(const EmuStateArea& a, const EmuStateArea& b) { return a.slots_ == b.slots_; }

 private:
  static int idx(Slot s) { return static_cast<int>(s); }
  std::array<std::uint32_t, kNumSlots> slots_{};
  std::array<std::uint64_t, kNumSlots> stamps_{};
  std::uint64_t clock_ = 0;
};

// Emulator-side system state not covered by the state area.
struct SystemState {
  Mode mode = Mode::User;
  bool irq_masked = false;
  std::array<std::uint32_t, kNumSysRegs> sysregs{};
};

// Loads a GuestState into the area (both CCR forms) and system state.
void load_state(const GuestState& g, EmuStateArea& area, SystemState& sys);
// Reads the architectural state back, using the newest CCR representation.
GuestState materialize_state(const EmuStateArea& area, const SystemState& sys, std::uint32_t pc);

struct HelperResult {
  enum class Status : std::uint8_t { Ok, PageFault, PrivilegeFault };
  Status status = Status::Ok;
  PageFault fault;
  int cost = 0;          // internal host instructions charged to the Helper tag
  bool tlb_flushed = false;
};

inline constexpr int kHelperCostTlbHit = 6;
inline constexpr int kHelperCostWalk = 12;
inline constexpr int kHelperCostSystem = 8;

struct MemoryEnv {
  PhysMemory& mem;
  Tlb* tlb;  // null: walk on every access
};

// System-level helper. Operates only on the state area and system state.
HelperResult helper_system(const GuestInstr& instr, EmuStateArea& area, SystemState& sys, Tlb* tlb);

// Memory helper: softmmu translation plus the access itself, through the area.
HelperResult helper_memory(const GuestInstr& instr, EmuStateArea& area, const SystemState& sys,
                           MemoryEnv env);

std::uint32_t effective_address(const GuestInstr& instr, std::uint32_t base);

}  // namespace sdbt
