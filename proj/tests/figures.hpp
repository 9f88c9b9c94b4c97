// Block shapes of the worked figures: source, level, printed block.
#pragma once

#include "sdbt/optimizer.hpp"

namespace sdbt::figures {

struct Case {
  const char* name;
  const char* what;
  const char* src;
  OptLevel level;
  const char* block;
};

inline const Case kCases[] = {
    {"Fig5BasicCoordination", "Check, hcmp, Save, helper, Restore, guarded add, boundary Save.",
     R"(    cmp r1, r2
    vmsr fpscr, r3
    addeq r0, r0, #1
    halt
)",
     OptLevel::Base,
     R"(block @0 (4 guest)
  check
  g-1  restore.full { ccr } interrupt_check
  g0  hcmp h1, h2
 L0:
  g1  save.full { r3 ccr } system_level
  g1  hcall sys, g1, stub -1
  g1  restore.full { ccr } system_level
  g2  hflagext h15, eq
  g2  hcmp h15, #0
  g2  hjcc eq, 1
  g2  hadd h0, h0, #1
 L1:
  g2  restore.full { ccr } constrained_rule
  g3  save.full { r0 ccr } tb_boundary
  exit 0
)"},
    {"Fig10TwoPairsBeforeMerging", "Each store gets its own Save/Restore pair before merging.",
     R"(    cmp r1, r2
    str r3, [r7]
    str r4, [r7, #4]
    addeq r0, r0, #1
    halt
)",
     OptLevel::Reduction,
     R"(block @0 (5 guest)
  check
  g-1  restore.packed { ccr } interrupt_check
  g0  hcmp h1, h2
 L0:
  g1  save.packed { r3 r7 ccr } memory_access
  g1  hcall mem, g1, stub -1
  g1  restore.packed { ccr } memory_access
  g2  save.packed { r4 r7 ccr } memory_access
  g2  hcall mem, g2, stub -1
  g2  restore.packed { ccr } memory_access
  g3  hflagext h15, eq
  g3  hcmp h15, #0
  g3  hjcc eq, 1
  g3  hadd h0, h0, #1
 L1:
  g3  restore.packed { ccr } constrained_rule
  g4  save.packed { r0 ccr } tb_boundary
  exit 0
)"},
    {"Fig8OnlyFirstRestoreKept", "The helper's Restore is the only CCR restore ahead of the addeq run.",
     R"(    cmp r1, r2
    str r3, [r7]
    addeq r0, r0, #1
    addeq r4, r4, r5
    addeq r6, r6, #3
    halt
)",
     OptLevel::Elimination,
     R"(block @0 (6 guest)
  check
  g0  hcmp h1, h2
 L0:
  g1  save.packed { r3 r7 ccr } memory_access
  g1  hcall mem, g1, stub -1
  g1  restore.packed { ccr } memory_access
  g2  hjcc ne, 1
  g2  hadd h0, h0, #1
 L1:
  g3  hjcc ne, 2
  g3  hadd h4, h4, h5
 L2:
  g4  hjcc ne, 3
  g4  hadd h6, h6, #3
 L3:
  g5  save.packed { r0 r4 r6 ccr } tb_boundary
  exit 0
)"},
    {"Fig10OnePairAroundBothStores", "Two adjacent stores share one Save/Restore pair.",
     R"(    cmp r1, r2
    str r3, [r7]
    str r4, [r7, #4]
    addeq r0, r0, #1
    halt
)",
     OptLevel::Elimination,
     R"(block @0 (5 guest)
  check
  g0  hcmp h1, h2
 L0:
  g1  save.packed { r3 r4 r7 ccr } memory_access
  g1  hcall mem, g1, stub -1
  g2  hcall mem, g2, stub -1
  g2  restore.packed { ccr } memory_access
  g3  hjcc ne, 1
  g3  hadd h0, h0, #1
 L1:
  g4  save.packed { r0 ccr } tb_boundary
  exit 0
)"},
    {"Fig12CmpMovedAfterLoad", "cmp moves next to bne; the load's syncs drop CCR.",
     R"(    cmp r1, r2
    ldr r3, [r7]
    bne 0x40
.org 0x40
    halt
)",
     OptLevel::Scheduling,
     R"(block @0 (3 guest)
 L0:
  g1  save.packed { r7 } memory_access
  check
  g1  hcall mem, g1, stub -1
  g1  restore.packed { r3 } memory_access
  g0  hcmp h1, h2
  g2  hjcc ne, 1
  g2  save.packed { ccr } tb_boundary
  exit 0
 L1:
  g2  save.packed { ccr } tb_boundary
  exit 1
)"},
    {"Fig13CheckSharesLoadPair", "ldr overwrites the cmp operand, so the check moves instead: [cmp; Save; check; ldr; Restore].",
     R"(    cmp r1, r2
    ldr r1, [r7]
    bne 0x40
.org 0x40
    halt
)",
     OptLevel::Scheduling,
     R"(block @0 (3 guest)
  g0  hcmp h1, h2
 L0:
  g1  save.packed { r7 ccr } memory_access
  check
  g1  hcall mem, g1, stub -1
  g1  restore.packed { r1 ccr } memory_access
  g2  hjcc ne, 1
  g2  save.packed { ccr } tb_boundary
  exit 0
 L1:
  g2  save.packed { ccr } tb_boundary
  exit 1
)"},
};

// TB1 ends with cmp and jumps to TB2, which redefines the flags before bne.
inline const char* kFig11 = R"(
    cmp r1, r2
    b 0x40
.org 0x40
    cmp r3, r4
    bne 0x80
    halt
.org 0x80
    halt
)";

}  // namespace sdbt::figures
