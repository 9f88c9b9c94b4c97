#include <gtest/gtest.h>

#include "sdbt/guest_isa.hpp"

using namespace sdbt;

TEST(GuestAsm, ParsesBasicProgram) {
  auto p = parse_guest_asm(R"(
start:
    mov r1, #5
    adds r2, r1, r1
    addeq r3, r3, #1
    cmp r2, #10
    bne start
    ldr r4, [r5, #8]
    str r4, [r5]
    vmsr fpscr, r1
    vmrs r6, fpexc
    svc #3
    halt
)");
  ASSERT_EQ(p.instrs.size(), 11u);
  EXPECT_EQ(p.entry, 0u);
  const auto& add = p.instrs.at(4);
  EXPECT_EQ(add.op, Mnemonic::Add);
  EXPECT_TRUE(add.sets_flags);
  EXPECT_EQ(p.instrs.at(8).cond, Condition::EQ);
  EXPECT_EQ(p.instrs.at(16).target, 0u);
  EXPECT_EQ(p.instrs.at(16).cond, Condition::NE);
  EXPECT_EQ(p.instrs.at(20).imm, 8);
  EXPECT_EQ(p.instrs.at(28).sysreg, SysReg::Fpscr);
  EXPECT_EQ(p.instrs.at(36).imm, 3);
}

TEST(GuestAsm, RoundTripsThroughPrinter) {
  auto p = parse_guest_asm(R"(
.org 0x100
    mov r1, #-7
loop:
    subs r1, r1, #1
    lsl r2, r1, r3
    bge loop
    bl func
    halt
func:
    getcpsr r0
    bx r14
.org 0x2000
    .word 0xdeadbeef
    .word 17
)");
  auto again = parse_guest_asm(print_program(p));
  EXPECT_EQ(p, again);
  EXPECT_EQ(p.data.at(0x2000), 0xdeadbeefu);
  EXPECT_EQ(p.data.at(0x2004), 17u);
}

TEST(GuestAsm, Errors) {
  try {
    parse_guest_asm("mov r1, #1\nfrob r2\n");
    FAIL();
  } catch (const AsmError& e) {
    EXPECT_EQ(e.kind(), AsmError::Kind::UnknownMnemonic);
    EXPECT_EQ(e.line(), 2);
  }
  try {
    parse_guest_asm("b nowhere\n");
    FAIL();
  } catch (const AsmError& e) {
    EXPECT_EQ(e.kind(), AsmError::Kind::UnresolvedLabel);
  }
  EXPECT_THROW(parse_guest_asm("add r1, r2\n"), AsmError);
  EXPECT_THROW(parse_guest_asm("mov r15, #1\n"), AsmError);
}

TEST(GuestAsm, EmptyProgram) {
  auto p = parse_guest_asm("   \n; nothing\n");
  EXPECT_TRUE(p.instrs.empty());
}

TEST(Classify, Categories) {
  auto p = parse_guest_asm("add r1, r2, r3\nldr r1, [r2]\ntlbi\nb 0\nhalt\n");
  EXPECT_EQ(classify(p.instrs.at(0)), Category::RuleEligible);
  EXPECT_EQ(classify(p.instrs.at(4)), Category::MemoryAccess);
  EXPECT_EQ(classify(p.instrs.at(8)), Category::SystemLevel);
  EXPECT_EQ(classify(p.instrs.at(12)), Category::Branch);
  EXPECT_EQ(classify(p.instrs.at(16)), Category::Halt);
}

TEST(FlagDefUse, Shapes) {
  auto p = parse_guest_asm("cmp r1, r2\nands r1, r1, #1\naddeq r1, r1, r1\nbge 0\nlsls r1, r1, #1\n");
  EXPECT_EQ(flag_def_use(p.instrs.at(0)).defines, kAllFlags);
  EXPECT_EQ(flag_def_use(p.instrs.at(4)).defines, kFlagN | kFlagZ);
  EXPECT_EQ(flag_def_use(p.instrs.at(8)).uses, kFlagZ);
  EXPECT_EQ(flag_def_use(p.instrs.at(12)).uses, kFlagN | kFlagV);
  EXPECT_EQ(flag_def_use(p.instrs.at(16)).defines, kFlagN | kFlagZ | kFlagC);
}

TEST(Conditions, Hold) {
  EXPECT_TRUE(condition_holds(Condition::EQ, kFlagZ));
  EXPECT_FALSE(condition_holds(Condition::NE, kFlagZ));
  EXPECT_TRUE(condition_holds(Condition::GE, kFlagN | kFlagV));
  EXPECT_TRUE(condition_holds(Condition::LT, kFlagN));
  EXPECT_TRUE(condition_holds(Condition::AL, 0));
  EXPECT_EQ(invert(Condition::GE), Condition::LT);
}

TEST(RegDefUse, ConditionalDefIsUse) {
  auto p = parse_guest_asm("addne r1, r2, #1\nstr r3, [r4]\n");
  auto a = reg_def_use(p.instrs.at(0));
  EXPECT_EQ(a.defs, 1u << 1);
  EXPECT_EQ(a.kills, 0u);
  EXPECT_EQ(a.uses, (1u << 1) | (1u << 2));
  auto s = reg_def_use(p.instrs.at(4));
  EXPECT_EQ(s.uses, (1u << 3) | (1u << 4));
}
