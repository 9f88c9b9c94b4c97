#include <gtest/gtest.h>

#include "sdbt/machine.hpp"

using namespace sdbt;

TEST(PhysMemory, LittleEndianAndSparse) {
  PhysMemory m;
  m.write32(0x1000, 0x11223344);
  EXPECT_EQ(m.read8(0x1000), 0x44);
  EXPECT_EQ(m.read32(0x1000), 0x11223344u);
  EXPECT_EQ(m.read32(0x90000000), 0u);
  PhysMemory z;
  z.write32(0x5000, 0);
  EXPECT_TRUE(z.same_contents(PhysMemory{}));
  PhysMemory copy = m;
  copy.write32(0x1000, 1);
  EXPECT_EQ(m.read32(0x1000), 0x11223344u);
}

TEST(PageWalk, MapsAndFaults) {
  PhysMemory m;
  PageTableBuilder b(m, 0x00F00000);
  b.map(0x40000000, 0x00010000, true);
  b.map(0x40001000, 0x00011000, false);
  auto t = page_walk(0x40000abc, Access::Read, b.root(), m);
  ASSERT_TRUE(t.ok());
  EXPECT_EQ(*t.gpa, 0x00010abcu);
  auto ro = page_walk(0x40001004, Access::Write, b.root(), m);
  EXPECT_FALSE(ro.ok());
  EXPECT_EQ(ro.fault.kind, PageFault::Kind::Protection);
  auto miss = page_walk(0x50000000, Access::Read, b.root(), m);
  EXPECT_EQ(miss.fault.kind, PageFault::Kind::NotMapped);
}

TEST(Tlb, HitEqualsWalkAndFlushForcesWalk) {
  PhysMemory m;
  PageTableBuilder b(m, 0x00F00000);
  b.identity(0x1000, 0x3000);
  Tlb tlb;
  auto a = tlb_lookup_or_fill(0x1004, Access::Read, tlb, b.root(), m);
  auto c = tlb_lookup_or_fill(0x1008, Access::Write, tlb, b.root(), m);
  EXPECT_EQ(tlb.misses, 1u);
  EXPECT_EQ(tlb.hits, 1u);
  EXPECT_EQ(*a.gpa, *page_walk(0x1004, Access::Read, b.root(), m).gpa);
  EXPECT_EQ(*c.gpa, 0x1008u);
  tlb.flush();
  tlb_lookup_or_fill(0x1004, Access::Read, tlb, b.root(), m);
  EXPECT_EQ(tlb.misses, 2u);
}

TEST(Interrupts, DeliverAndReturn) {
  Machine mc;
  mc.handlers[5] = 0x800;
  mc.irq = InterruptController({{3, 5}});
  mc.state.pc = 0x40;
  mc.state.nzcv = kFlagC;
  EXPECT_FALSE(deliver_interrupt(mc, 2));
  EXPECT_TRUE(deliver_interrupt(mc, 3));
  EXPECT_EQ(mc.state.pc, 0x800u);
  EXPECT_EQ(mc.state.mode, Mode::Privileged);
  EXPECT_TRUE(mc.state.irq_masked);
  EXPECT_EQ(mc.state.sysreg(SysReg::Elr), 0x40u);
  EXPECT_FALSE(deliver_interrupt(mc, 10));
  exception_return(mc.state);
  EXPECT_EQ(mc.state.pc, 0x40u);
  EXPECT_EQ(mc.state.mode, Mode::User);
  EXPECT_EQ(mc.state.nzcv, kFlagC);
}

TEST(Interrupts, MaskedStaysPending) {
  Machine mc;
  mc.handlers[5] = 0x800;
  mc.irq = InterruptController({{0, 5}});
  mc.state.irq_masked = true;
  EXPECT_FALSE(deliver_interrupt(mc, 4));
  EXPECT_TRUE(mc.irq.pending(4).has_value());
}

TEST(Interrupts, UnconfiguredVectorThrows) {
  Machine mc;
  mc.irq = InterruptController({{0, 9}});
  EXPECT_THROW(deliver_interrupt(mc, 0), UnconfiguredVector);
}

TEST(StateArea, CcrFreshness) {
  EmuStateArea a;
  a.set_ccr_coherent(kFlagN | kFlagV);
  EXPECT_TRUE(a.packed_fresh());
  EXPECT_TRUE(a.flags_fresh());
  a.set(Slot::CcrPacked, kFlagZ);
  EXPECT_TRUE(a.packed_fresh());
  EXPECT_FALSE(a.flags_fresh());
  EXPECT_EQ(a.current_ccr(), kFlagZ);
  a.set_flag_slots(kFlagC);
  EXPECT_EQ(a.current_ccr(), kFlagC);
}

TEST(Helpers, SystemPrivilegeAndEffects) {
  auto p = parse_guest_asm("vmsr ttbr, r1\nvmrs r2, ttbr\nsetcpsr r3\ngetcpsr r4\n");
  EmuStateArea a;
  SystemState sys;
  a.set_gpr(1, 0x1234);
  auto f = helper_system(p.instrs.at(0), a, sys, nullptr);
  EXPECT_EQ(f.status, HelperResult::Status::PrivilegeFault);
  sys.mode = Mode::Privileged;
  EXPECT_EQ(helper_system(p.instrs.at(0), a, sys, nullptr).status, HelperResult::Status::Ok);
  helper_system(p.instrs.at(4), a, sys, nullptr);
  EXPECT_EQ(a.gpr(2), 0x1234u);
  a.set_gpr(3, 0xA0000080u);
  helper_system(p.instrs.at(8), a, sys, nullptr);
  EXPECT_EQ(sys.mode, Mode::User);
  EXPECT_TRUE(sys.irq_masked);
  EXPECT_EQ(a.flags_from_slots(), kFlagN | kFlagC);
  helper_system(p.instrs.at(12), a, sys, nullptr);
  EXPECT_EQ(a.gpr(4), 0xA0000080u);
}

TEST(Helpers, MemoryThroughPageTable) {
  PhysMemory m;
  PageTableBuilder b(m, 0x00F00000);
  b.map(0x40000000, 0x2000, true);
  auto p = parse_guest_asm("str r1, [r2, #4]\nldr r3, [r2, #4]\nldr r3, [r2, #2]\n");
  EmuStateArea a;
  SystemState sys;
  sys.sysregs[static_cast<int>(SysReg::Ttbr)] = b.root();
  a.set_gpr(1, 77);
  a.set_gpr(2, 0x40000000);
  Tlb tlb;
  auto s = helper_memory(p.instrs.at(0), a, sys, {m, &tlb});
  EXPECT_EQ(s.cost, kHelperCostTlbHit + kHelperCostWalk);
  EXPECT_EQ(m.read32(0x2004), 77u);
  auto l = helper_memory(p.instrs.at(4), a, sys, {m, &tlb});
  EXPECT_EQ(l.cost, kHelperCostTlbHit);
  EXPECT_EQ(a.gpr(3), 77u);
  auto bad = helper_memory(p.instrs.at(8), a, sys, {m, &tlb});
  EXPECT_EQ(bad.status, HelperResult::Status::PageFault);
  EXPECT_EQ(bad.fault.kind, PageFault::Kind::Alignment);
}
