#include <gtest/gtest.h>

#include <random>

#include "sdbt/runtime.hpp"
#include "sdbt/workload.hpp"

using namespace sdbt;

namespace {

const RuleSet& starter() {
  static RuleSet r = load_rules(SDBT_SOURCE_DIR "/rules/starter.rules");
  return r;
}

void expect_matches_oracle(const std::string& src, Pipeline p, OptLevel l) {
  GuestProgram prog = parse_guest_asm(src);
  Machine m = default_machine(prog);
  InterpResult ref = run_reference(prog, m);
  DbtResult got = run_dbt(prog, m, starter(), RuntimeConfig{p, l, true, 10'000, {}});
  EXPECT_EQ(got.status, ref.status);
  EXPECT_EQ(got.counters.guest_num, ref.retired);
  EXPECT_EQ(quiescent_diff(got.state, got.mem, ref.state, ref.mem), "") << print_program(prog);
}

const char* kLoop = R"(
    mov r0, #0
    mov r1, #10
    mov r5, #0x4000
loop:
    add r0, r0, r1
    str r0, [r5]
    ldr r2, [r5]
    subs r1, r1, #1
    addeq r3, r3, #7
    bne loop
    cmp r0, #55
    moveq r4, #1
    halt
)";

}  // namespace

TEST(Runtime, LoopMatchesOracleAllConfigs) {
  expect_matches_oracle(kLoop, Pipeline::Baseline, OptLevel::Base);
  for (OptLevel l : {OptLevel::Base, OptLevel::Reduction, OptLevel::Elimination, OptLevel::Scheduling})
    expect_matches_oracle(kLoop, Pipeline::Rules, l);
}

namespace {

Workload bundled(const std::string& name) { return load_workload(SDBT_SOURCE_DIR "/workloads/" + name + ".yaml"); }

DbtResult run_workload(const Workload& w, OptLevel l, bool chaining = true, Pipeline p = Pipeline::Rules) {
  return run_dbt(w.program, build_machine(w), starter(), RuntimeConfig{p, l, chaining, w.fuel, {}});
}

constexpr OptLevel kLevels[] = {OptLevel::Base, OptLevel::Reduction, OptLevel::Elimination, OptLevel::Scheduling};

}  // namespace

TEST(Runtime, IrqStormLatencyAndNoLostInterrupts) {
  Workload w = bundled("irqstorm");
  for (OptLevel l : kLevels) {
    DbtResult r = run_workload(w, l);
    EXPECT_EQ(r.status, RunStatus::Halted);
    EXPECT_EQ(r.counters.interrupts, w.interrupts.size()) << opt_level_name(l);
    EXPECT_LE(r.counters.max_irq_latency, 2u) << opt_level_name(l);
  }
}

TEST(Runtime, DeferredUnpackOnlyWhenStateIsObserved) {
  // No interrupts, faults or service calls: the packed CCR is never parsed.
  EXPECT_EQ(run_workload(bundled("mixed"), OptLevel::Reduction).counters.deferred_unpacks, 0u);
  EXPECT_EQ(run_workload(bundled("alu-loop"), OptLevel::Scheduling).counters.deferred_unpacks, 0u);
  // Interrupts taken after packed saves parse it on entry.
  DbtResult r = run_workload(bundled("irqstorm"), OptLevel::Reduction);
  EXPECT_GT(r.counters.deferred_unpacks, 0u);
  EXPECT_EQ(r.counters.vm.stale_ccr_reads, 0u);
}

TEST(Runtime, ChainingCutsContextSwitchesWithoutChangingState) {
  Workload w = bundled("alu-loop");
  DbtResult on = run_workload(w, OptLevel::Scheduling, true);
  DbtResult off = run_workload(w, OptLevel::Scheduling, false);
  EXPECT_EQ(quiescent_diff(on.state, on.mem, off.state, off.mem), "");
  EXPECT_LT(on.counters.context_switches, off.counters.context_switches);
  EXPECT_GT(on.counters.chained, 0u);
  EXPECT_EQ(off.counters.chained, 0u);
  // Each distinct block is translated exactly once.
  EXPECT_EQ(on.counters.translations, off.counters.translations);
}

TEST(Runtime, SyncInstructionsNonIncreasingAcrossLevels) {
  for (const char* name : {"alu-loop", "membound", "sysmix", "irqstorm", "mixed"}) {
    Workload w = bundled(name);
    std::uint64_t prev = UINT64_MAX;
    for (OptLevel l : kLevels) {
      DbtResult r = run_workload(w, l);
      std::uint64_t sync = r.counters.vm.by_tag[static_cast<std::size_t>(HostTag::Sync)];
      EXPECT_LE(sync, prev) << name << " " << opt_level_name(l);
      prev = sync;
    }
  }
}

TEST(Runtime, FuelExhaustionMatchesOracle) {
  GuestProgram p = parse_guest_asm("loop:\n    add r0, r0, #1\n    b loop\n");
  Machine m = default_machine(p);
  InterpResult ref = run_reference(p, m, InterpOptions{500, false, false});
  for (OptLevel l : kLevels) {
    DbtResult r = run_dbt(p, m, starter(), RuntimeConfig{Pipeline::Rules, l, true, 500, {}});
    EXPECT_EQ(r.status, RunStatus::FuelExhausted);
    EXPECT_EQ(ref.status, RunStatus::FuelExhausted);
  }
}

TEST(Runtime, JumpToNothingIsUndefined) {
  GuestProgram p = parse_guest_asm("    mov r3, #0x3000\n    bx r3\n");
  Machine m = default_machine(p);
  EXPECT_EQ(run_reference(p, m).status, RunStatus::UndefinedInstruction);
  EXPECT_EQ(run_dbt(p, m, starter(), RuntimeConfig{}).status, RunStatus::UndefinedInstruction);
}

TEST(Runtime, UnconfiguredVectorStops) {
  GuestProgram p = parse_guest_asm("    mov r3, #0x900000\n    ldr r4, [r3]\n    halt\n");
  Machine m = default_machine(p);
  EXPECT_EQ(run_reference(p, m).status, RunStatus::UnconfiguredVector);
  DbtResult r = run_dbt(p, m, starter(), RuntimeConfig{});
  EXPECT_EQ(r.status, RunStatus::UnconfiguredVector);
  EXPECT_FALSE(r.error.empty());
}

TEST(Runtime, MissCountsContextSwitchAndTranslation) {
  GuestProgram p = parse_guest_asm("    halt\n");
  DbtResult r = run_dbt(p, default_machine(p), starter(), RuntimeConfig{});
  EXPECT_EQ(r.counters.translations, 1u);
  // One miss into the block, one switch out at the halt.
  EXPECT_EQ(r.counters.context_switches, 2u);
}

namespace {

struct NoHelpers : HelperHost {
  bool call_helper(HelperId, std::uint16_t, int&) override { return true; }
};

void run_sync(VmContext& ctx, const SyncOp& op) {
  std::vector<HostInstr> code = lower_sync(op);
  code.push_back(h::exit(0));
  NoHelpers none;
  vm_execute(code, ctx, none);
}

}  // namespace

TEST(Sync, SaveThenRestoreIsIdentityForAnyComponentSet) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    EmuStateArea area;
    VmContext ctx;
    ctx.area = &area;
    for (auto& r : ctx.h) r = rng();
    ctx.flags = static_cast<std::uint8_t>(rng() & 0xf);
    Components c{static_cast<RegMask>(rng() & kResidentMask), (rng() & 1) != 0, false};
    if (c.empty()) continue;
    SyncMode mode = (rng() & 1) ? SyncMode::Packed : SyncMode::Full;
    VmContext before = ctx;
    run_sync(ctx, SyncOp{SyncKind::Save, c, mode, SyncCause::MemoryAccess, 0});
    for (int r = 0; r < kNumResidentRegs; ++r) ctx.h[r] = ~ctx.h[r];
    ctx.flags ^= 0xf;
    run_sync(ctx, SyncOp{SyncKind::Restore, c, mode, SyncCause::MemoryAccess, 0});
    for (int r = 0; r < kNumResidentRegs; ++r)
      if (c.gprs & (1u << r)) ASSERT_EQ(ctx.h[r], before.h[r]) << "trial " << trial;
    if (c.ccr) ASSERT_EQ(ctx.flags, before.flags) << "trial " << trial;
    EXPECT_EQ(ctx.counters.sync_ops, 2u);
    EXPECT_EQ(ctx.counters.by_tag[static_cast<std::size_t>(HostTag::Sync)],
              static_cast<std::uint64_t>(2 * sync_length(SyncOp{SyncKind::Save, c, mode, SyncCause::MemoryAccess, 0})));
  }
}

TEST(Runtime, ZeroFuelRetiresNothing) {
  GuestProgram p = parse_guest_asm("    add r0, r0, #1\n    halt\n");
  DbtResult r = run_dbt(p, default_machine(p), starter(), RuntimeConfig{Pipeline::Rules, OptLevel::Scheduling, true, 0, {}});
  EXPECT_EQ(r.status, RunStatus::FuelExhausted);
  EXPECT_EQ(r.counters.guest_num, 0u);
}

TEST(Runtime, InterruptAtFiftyRunsHandlerOnce) {
  Workload w = bundled("alu-loop");
  w.program = parse_guest_asm(print_program(w.program) + ".org 0x800\n    vmsr scratch0, r12\n    mov r12, #0x5000\n"
                              "    str r12, [r12]\n    vmrs r12, scratch0\n    svc #0\n");
  w.handlers = {{5, 0x800}};
  w.interrupts = {{50, 5}};
  w.expected.reset();
  for (OptLevel l : kLevels) {
    DbtResult r = run_workload(w, l);
    EXPECT_EQ(r.counters.interrupts, 1u);
    EXPECT_EQ(r.mem.read32(0x5000), 0x5000u);
    InterpResult ref = run_reference(w.program, build_machine(w), InterpOptions{w.fuel, false, false});
    EXPECT_EQ(quiescent_diff(r.state, r.mem, ref.state, ref.mem), "");
  }
}

TEST(Runtime, HotLoopStopsSwitchingOnceChained) {
  Workload w = bundled("alu-loop");
  DbtResult small = run_dbt(w.program, build_machine(w), starter(), RuntimeConfig{Pipeline::Rules, OptLevel::Scheduling, true, 200, {}});
  DbtResult big = run_dbt(w.program, build_machine(w), starter(), RuntimeConfig{Pipeline::Rules, OptLevel::Scheduling, true, 2000, {}});
  EXPECT_EQ(small.counters.context_switches, big.counters.context_switches);
  EXPECT_GT(big.counters.chained, small.counters.chained);
}

TEST(Runtime, RetranslationIsDeterministic) {
  Workload w = bundled("mixed");
  for (const auto& [pc, g] : w.program.instrs) {
    (void)g;
    HostBlock a = translate_block(w.program, pc, starter(), Pipeline::Rules, OptLevel::Scheduling);
    HostBlock b = translate_block(w.program, pc, starter(), Pipeline::Rules, OptLevel::Scheduling);
    ASSERT_EQ(a, b);
    EXPECT_EQ(lower_block(a), lower_block(b));
  }
}

TEST(Runtime, TagCountersSumToTotal) {
  DbtResult r = run_workload(bundled("sysmix"), OptLevel::Scheduling);
  std::uint64_t sum = 0;
  for (auto n : r.counters.vm.by_tag) sum += n;
  EXPECT_EQ(sum, r.counters.vm.total());
  EXPECT_GT(r.counters.vm.by_tag[static_cast<std::size_t>(HostTag::Helper)], 0u);
  EXPECT_GT(r.counters.vm.by_tag[static_cast<std::size_t>(HostTag::Check)], 0u);
}
