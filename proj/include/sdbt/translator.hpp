// Translation of guest blocks into host code.
//
// A HostBlock is a symbolic item list: host instructions, state-sync
// operations, helper calls, the interrupt check, labels and exits. Optimizer
// passes rewrite the item list; lower_block() turns it into executable host
// code with out-of-line stubs for precise exits.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdbt/guest_isa.hpp"
#include "sdbt/host_isa.hpp"
#include "sdbt/rules.hpp"

namespace sdbt {

enum class SyncKind : std::uint8_t { Save, Restore };
enum class SyncMode : std::uint8_t { Full, Packed };
enum class SyncCause : std::uint8_t {
  SystemLevel, MemoryAccess, InterruptCheck, TbBoundary, ConstrainedRule, Fallback,
};
inline constexpr int kNumSyncCauses = 6;
std::string_view sync_cause_name(SyncCause c);

struct Components {
  RegMask gprs = 0;  // resident registers only (r0..r11)
  bool ccr = false;
  bool pc = false;

  bool empty() const { return gprs == 0 && !ccr && !pc; }
  Components operator|(const Components& o) const { return {static_cast<RegMask>(gprs | o.gprs), ccr || o.ccr, pc || o.pc}; }
  Components minus(const Components& o) const {
    return {static_cast<RegMask>(gprs & ~o.gprs), ccr && !o.ccr, pc && !o.pc};
  }
  friend bool operator==(const Components&, const Components&) = default;
};

struct SyncOp {
  SyncKind kind = SyncKind::Save;
  Components comps;
  SyncMode mode = SyncMode::Full;
  SyncCause cause = SyncCause::TbBoundary;
  std::uint32_t pc_value = 0;  // stored by a Save that includes pc

  friend bool operator==(const SyncOp&, const SyncOp&) = default;
};

class SyncError : public std::runtime_error {
 public:
  enum class Kind { Empty, UnknownComponent };
  SyncError(Kind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Host code for one sync operation, every instruction tagged Sync.
std::vector<HostInstr> lower_sync(const SyncOp& op);
int sync_length(const SyncOp& op);

enum class Pipeline : std::uint8_t { Baseline, Rules };

enum class ItemKind : std::uint8_t { Host, Sync, Helper, Check, Label, Exit };
enum class ItemRole : std::uint8_t { Body, Staging, CondTest, CondBranch };

struct Item {
  ItemKind kind = ItemKind::Host;
  ItemRole role = ItemRole::Body;
  HostInstr host;  // Host and Helper; a Host jump targets a label id
  SyncOp sync;
  int label = -1;
  int guest = -1;  // first guest instruction of the owning segment
  int exit = -1;   // Exit items and the TbBoundary save in front of them

  friend bool operator==(const Item&, const Item&) = default;
};

enum class ExitKind : std::uint8_t { Direct, Indirect, Halt, Svc, Fault, Interrupt };

struct ExitDesc {
  ExitKind kind = ExitKind::Direct;
  std::uint32_t target = 0;  // next guest pc, or the resume pc for stubs
  std::uint8_t reg = 0;      // Indirect: register holding the target
  std::uint32_t retired = 0;
  std::uint32_t rule_covered = 0;
  std::uint32_t memory = 0;
  std::uint32_t system = 0;
  bool chainable = false;

  friend bool operator==(const ExitDesc&, const ExitDesc&) = default;
};

struct HostBlock {
  Pipeline pipeline = Pipeline::Rules;
  std::uint32_t guest_pc = 0;
  std::vector<GuestInstr> tb;
  std::vector<int> span;            // per guest index: segment length, 0 inside a segment
  std::vector<bool> rule_covered;   // per guest index
  std::vector<bool> fallback;       // per guest index
  std::vector<Item> items;
  std::vector<ExitDesc> exits;
  SyncMode boundary_mode = SyncMode::Full;
  int next_label = 0;

  friend bool operator==(const HostBlock&, const HostBlock&) = default;
};

inline constexpr int kMaxTbLength = 32;

// Guest instructions of the block at `pc`: up to the first terminator, a
// missing instruction, or the length limit. Empty when `pc` has none.
std::vector<GuestInstr> scan_tb(const GuestProgram& program, std::uint32_t pc, int max_len = kMaxTbLength);

HostBlock translate_tb_rules(const std::vector<GuestInstr>& tb, const RuleSet& rules);
HostBlock translate_tb_baseline(const std::vector<GuestInstr>& tb);

// Recomputes the register part of every TbBoundary save from the host-dirty
// set at that exit.
void refresh_epilogues(HostBlock& block);

struct LoweredBlock {
  std::vector<HostInstr> code;
  std::vector<ExitDesc> exits;  // block exits first, then stub exits

  friend bool operator==(const LoweredBlock&, const LoweredBlock&) = default;
};

// `drop` removes components from the boundary save of the given exit; used
// on chained edges whose target kills those components before use.
LoweredBlock lower_block(const HostBlock& block, const std::map<int, Components>& drop = {});

// Static counts over the item list.
struct BlockStats {
  int sync_ops = 0;
  int sync_instrs = 0;
  int host_instrs = 0;
  int by_cause[kNumSyncCauses] = {};
};
BlockStats block_stats(const HostBlock& block);
std::string print_block(const HostBlock& block);

}  // namespace sdbt
