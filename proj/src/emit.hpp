// Item-list emission helpers shared by the two translation pipelines.
#pragma once

#include <array>

#include "sdbt/translator.hpp"

namespace sdbt::detail {

class Emitter {
 public:
  explicit Emitter(HostBlock& b) : b_(b) {}

  void host(HostInstr i, int guest, ItemRole role = ItemRole::Body);
  void sync(SyncKind kind, Components c, SyncCause cause, int guest, SyncMode mode = SyncMode::Full);
  void helper(HelperId id, int guest);
  void check();
  int new_label() { return b_.next_label++; }
  void place(int label);
  void exit(const ExitDesc& d, int guest, bool epilogue);

  HostBlock& block() { return b_; }

 private:
  HostBlock& b_;
};

// Temporaries for code that works on the state area instead of resident
// registers: h0..h3 in the baseline, h12..h15 inside a fallback.
using Temps = std::array<int, 4>;
inline constexpr Temps kBaselineTemps{0, 1, 2, 3};
inline constexpr Temps kFallbackTemps{12, 13, 14, 15};

// Jumps to `label` when `cond` holds, reading the flags from the state area.
void emit_slot_cond_jump(Emitter& e, int guest, Condition cond, int label, const Temps& t);

// QEMU-style body: every operand is loaded from the area and every result
// (including each defined flag) is stored back.
void emit_area_body(Emitter& e, int guest, const GuestInstr& g, const Temps& t, bool store_pc);

// Block terminator (branch, halt, svc) or the fall-through exit after the
// last instruction. `flags_in_host`: conditions test host FLAGS directly.
void emit_terminator(Emitter& e, int idx, bool flags_in_host, bool epilogue);
void emit_fallthrough(Emitter& e, int idx, bool epilogue);

// Credits for leaving the block after `count` guest instructions.
ExitDesc credit(const HostBlock& b, int count);

}  // namespace sdbt::detail
