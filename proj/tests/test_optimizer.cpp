#include <gtest/gtest.h>

#include "figures.hpp"
#include "sdbt/fuzz.hpp"

using namespace sdbt;

namespace {

const RuleSet& starter() {
  static RuleSet r = load_rules(SDBT_SOURCE_DIR "/rules/starter.rules");
  return r;
}

HostBlock block(const std::string& src, OptLevel level, std::uint32_t pc = 0) {
  return translate_block(parse_guest_asm(src), pc, starter(), Pipeline::Rules, level);
}

std::string shape(const std::string& src, OptLevel level) { return print_block(block(src, level)); }

int sync_instrs(const HostBlock& b) { return block_stats(b).sync_instrs; }

const SyncOp* find_sync(const HostBlock& b, SyncKind k, SyncCause c) {
  for (const Item& it : b.items)
    if (it.kind == ItemKind::Sync && it.sync.kind == k && it.sync.cause == c) return &it.sync;
  return nullptr;
}

// Items outside a pass's trigger class, in order.
template <class Pred>
std::vector<Item> outside(const HostBlock& b, Pred in_region) {
  std::vector<Item> out;
  for (const Item& it : b.items)
    if (!in_region(it)) out.push_back(it);
  return out;
}

}  // namespace

TEST(FigureShapes, Fig5To13BlockShapes) {
  for (const figures::Case& c : figures::kCases)
    EXPECT_EQ(shape(c.src, c.level), c.block) << c.name << ": " << c.what;
}

TEST(FigureShapes, Fig11InterTbDropsBoundaryCcr) {
  GuestProgram p = parse_guest_asm(figures::kFig11);
  HostBlock tb1 = translate_block(p, 0, starter(), Pipeline::Rules, OptLevel::Elimination);
  HostBlock tb2 = translate_block(p, 0x40, starter(), Pipeline::Rules, OptLevel::Elimination);
  ChainGraph g;
  g.nodes = {&tb1, &tb2};
  g.edges = {{0, 0, 1}};
  auto drops = pass_inter_tb(g);
  auto edge = drops.find({0, 0});
  ASSERT_NE(edge, drops.end());
  EXPECT_TRUE(edge->second.ccr);
  // TB2's entry restore is gone as well.
  EXPECT_EQ(find_sync(tb2, SyncKind::Restore, SyncCause::InterruptCheck), nullptr);
  // The dropped save is really absent from the lowered edge.
  LoweredBlock plain = lower_block(tb1);
  LoweredBlock chained = lower_block(tb1, {{0, edge->second}});
  EXPECT_EQ(plain.code.size() - chained.code.size(), 3u);
}

TEST(FigureShapes, Fig11NegativeWhenTargetReadsFlagsFirst) {
  GuestProgram p = parse_guest_asm(R"(
    cmp r1, r2
    b 0x40
.org 0x40
    addeq r5, r5, #1
    halt
)");
  HostBlock tb1 = translate_block(p, 0, starter(), Pipeline::Rules, OptLevel::Elimination);
  HostBlock tb2 = translate_block(p, 0x40, starter(), Pipeline::Rules, OptLevel::Elimination);
  EXPECT_FALSE(summarize(tb2).ccr_killed);
  EXPECT_FALSE(edge_drop(summarize(tb2)).ccr);
  EXPECT_NE(find_sync(tb2, SyncKind::Restore, SyncCause::InterruptCheck), nullptr);
}

TEST(Reduce, MemorySaveIsPackedButSetcpsrStaysFull) {
  HostBlock mem = block("cmp r1, r2\nstr r3, [r4]\naddeq r0, r0, #1\nhalt\n", OptLevel::Reduction);
  const SyncOp* s = find_sync(mem, SyncKind::Save, SyncCause::MemoryAccess);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->mode, SyncMode::Packed);
  EXPECT_EQ(sync_length(SyncOp{SyncKind::Save, Components{0, true, false}, s->mode, s->cause, 0}), 3);
  HostBlock sys = block("cmp r1, r2\nsetcpsr r3\naddeq r0, r0, #1\nhalt\n", OptLevel::Reduction);
  s = find_sync(sys, SyncKind::Save, SyncCause::SystemLevel);
  ASSERT_NE(s, nullptr);
  EXPECT_TRUE(s->comps.ccr);
  EXPECT_EQ(s->mode, SyncMode::Full);
}

TEST(Reduce, BaseLevelIsIdentity) {
  GuestProgram p = parse_guest_asm("cmp r1, r2\nstr r3, [r4]\naddeq r0, r0, #1\nhalt\n");
  HostBlock b = translate_tb_rules(scan_tb(p, 0), starter());
  HostBlock c = b;
  run_pipeline(c, OptLevel::Base);
  EXPECT_EQ(b, c);
}

TEST(EliminateRestores, SingleConditionalUnchangedBeforeElimination) {
  HostBlock b = block("cmp r1, r2\nstr r3, [r4]\naddeq r0, r0, #1\nhalt\n", OptLevel::Reduction);
  EXPECT_NE(find_sync(b, SyncKind::Restore, SyncCause::ConstrainedRule), nullptr);
}

TEST(MergeMemory, RunOfLengthMHasOnePair) {
  for (int m = 1; m <= 8; ++m) {
    std::string src = "cmp r1, r2\n";
    for (int i = 0; i < m; ++i) src += "str r3, [r7, #" + std::to_string(4 * i) + "]\n";
    src += "addeq r0, r0, #1\nhalt\n";
    BlockStats s = block_stats(block(src, OptLevel::Elimination));
    EXPECT_EQ(s.by_cause[static_cast<int>(SyncCause::MemoryAccess)], 2) << "m=" << m;
  }
}

TEST(ScheduleDbu, DependentLoadBlocksMotion) {
  HostBlock b = block("cmp r1, r2\nldr r1, [r7]\nbne 0x40\n.org 0x40\nhalt\n", OptLevel::Scheduling);
  std::vector<int> order = segment_order(b);
  EXPECT_EQ(order.front(), 0);
}

TEST(ScheduleIrq, BlockWithoutMemoryKeepsEntryCheck) {
  HostBlock b = block("cmp r1, r2\naddeq r0, r0, #1\nhalt\n", OptLevel::Scheduling);
  EXPECT_EQ(b.items.front().kind, ItemKind::Check);
}

TEST(Pipeline, CompositeBlockSyncStrictlyDecreases) {
  // Figs. 8 and 10 in one block.
  const char* src = "cmp r1, r2\nstr r3, [r7]\nstr r4, [r7, #4]\naddeq r0, r0, #1\naddeq r5, r5, #2\n"
                    "addeq r6, r6, #3\nhalt\n";
  int prev = sync_instrs(block(src, OptLevel::Base));
  for (OptLevel l : {OptLevel::Reduction, OptLevel::Elimination, OptLevel::Scheduling}) {
    int n = sync_instrs(block(src, l));
    EXPECT_LT(n, prev) << opt_level_name(l);
    prev = n;
  }
}

TEST(Pipeline, IdempotentOnRandomBlocks) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    HostBlock b = translate_tb_rules(random_block(seed), starter());
    run_pipeline(b, OptLevel::Scheduling);
    HostBlock again = b;
    run_pipeline(again, OptLevel::Scheduling);
    ASSERT_EQ(b, again) << "seed " << seed;
  }
}

TEST(Pipeline, EliminateAndMergeStayInsideTheirRegions) {
  // A rewritten guard keeps its jump but loses the CondBranch role.
  auto elim_region = [](const Item& it) {
    return it.role == ItemRole::CondTest || it.role == ItemRole::CondBranch ||
           (it.kind == ItemKind::Host && it.host.op == HostOp::Jcc) ||
           (it.kind == ItemKind::Sync && it.sync.cause == SyncCause::ConstrainedRule);
  };
  auto merge_region = [](const Item& it) {
    return it.kind == ItemKind::Sync && it.sync.cause == SyncCause::MemoryAccess;
  };
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    HostBlock b = translate_tb_rules(random_block(seed), starter());
    pass_reduce(b);
    HostBlock e = b;
    pass_eliminate_restores(e);
    ASSERT_EQ(outside(b, elim_region), outside(e, elim_region)) << "seed " << seed;
    HostBlock m = b;
    pass_merge_memory(m);
    ASSERT_EQ(outside(b, merge_region), outside(m, merge_region)) << "seed " << seed;
  }
}

TEST(Pipeline, UnknownLevelNameRejected) {
  EXPECT_EQ(parse_opt_level("elimination"), OptLevel::Elimination);
  EXPECT_THROW(parse_opt_level("turbo"), std::invalid_argument);
}
