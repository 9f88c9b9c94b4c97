#include <gtest/gtest.h>

#include "sdbt/fuzz.hpp"

using namespace sdbt;

namespace {

const RuleSet& starter() {
  static RuleSet r = load_rules(SDBT_SOURCE_DIR "/rules/starter.rules");
  return r;
}

SyncOp op(SyncKind k, Components c, SyncMode m = SyncMode::Full) { return SyncOp{k, c, m, SyncCause::MemoryAccess, 0}; }

std::vector<GuestInstr> tb_of(const std::string& src) { return scan_tb(parse_guest_asm(src), 0); }

}  // namespace

TEST(LowerSync, CcrConstantsMatchFigureSeven) {
  Components ccr{0, true, false};
  EXPECT_EQ(lower_sync(op(SyncKind::Save, ccr, SyncMode::Full)).size(), 14u);
  EXPECT_EQ(lower_sync(op(SyncKind::Save, ccr, SyncMode::Packed)).size(), 3u);
  EXPECT_EQ(lower_sync(op(SyncKind::Restore, ccr, SyncMode::Full)).size(), 14u);
  EXPECT_EQ(lower_sync(op(SyncKind::Restore, ccr, SyncMode::Packed)).size(), 3u);
}

TEST(LowerSync, GprsCostOneEachAndAreTaggedSync) {
  auto code = lower_sync(op(SyncKind::Save, Components{0b1000, false, false}));
  ASSERT_EQ(code.size(), 1u);
  EXPECT_EQ(code[0].op, HostOp::St);
  EXPECT_EQ(lower_sync(op(SyncKind::Restore, Components{0b1011, true, false}, SyncMode::Packed)).size(), 6u);
  for (const HostInstr& h : lower_sync(op(SyncKind::Save, Components{0xfff, true, true})))
    EXPECT_EQ(h.tag, HostTag::Sync);
  EXPECT_EQ(sync_length(op(SyncKind::Save, Components{0xfff, true, false})), 12 + 14);
}

TEST(LowerSync, RejectsEmptyAndUnknownComponents) {
  try {
    lower_sync(op(SyncKind::Save, Components{}));
    FAIL();
  } catch (const SyncError& e) {
    EXPECT_EQ(e.kind(), SyncError::Kind::Empty);
  }
  try {
    lower_sync(op(SyncKind::Save, Components{1u << 12, false, false}));
    FAIL();
  } catch (const SyncError& e) {
    EXPECT_EQ(e.kind(), SyncError::Kind::UnknownComponent);
  }
  EXPECT_THROW(lower_sync(op(SyncKind::Restore, Components{0, false, true})), SyncError);
}

TEST(ScanTb, StopsAtTerminatorAndLengthLimit) {
  EXPECT_EQ(tb_of("add r1, r1, #1\nb 0\nadd r2, r2, #1\n").size(), 2u);
  std::string long_run;
  for (int i = 0; i < 40; ++i) long_run += "add r1, r1, #1\n";
  EXPECT_EQ(tb_of(long_run).size(), static_cast<std::size_t>(kMaxTbLength));
  EXPECT_TRUE(scan_tb(parse_guest_asm("halt\n"), 0x100).empty());
}

TEST(TranslateRules, PureAluBlockOnlyHasBoundarySave) {
  HostBlock b = translate_tb_rules(tb_of("add r1, r2, r3\neor r4, r1, #7\nhalt\n"), starter());
  BlockStats s = block_stats(b);
  EXPECT_EQ(s.by_cause[static_cast<int>(SyncCause::TbBoundary)], 1);
  EXPECT_EQ(s.by_cause[static_cast<int>(SyncCause::MemoryAccess)], 0);
  EXPECT_EQ(s.by_cause[static_cast<int>(SyncCause::SystemLevel)], 0);
  EXPECT_TRUE(b.rule_covered[0] && b.rule_covered[1]);
}

TEST(TranslateRules, AddIsOneHostInstruction) {
  HostBlock b = translate_tb_rules(tb_of("add r1, r2, r3\nhalt\n"), starter());
  int body = 0;
  for (const Item& it : b.items)
    if (it.kind == ItemKind::Host && it.guest == 0) ++body;
  EXPECT_EQ(body, 1);
}

TEST(TranslateRules, SystemInstructionsAreNeverRuleCovered) {
  HostBlock b = translate_tb_rules(tb_of("vmsr fpscr, r3\nhalt\n"), starter());
  EXPECT_FALSE(b.rule_covered[0]);
  EXPECT_FALSE(match_rule(std::span(b.tb).first(1), starter()).has_value());
}

TEST(TranslateBaseline, AddIsFiveAndCmpAtLeastEight) {
  auto count = [](const std::string& src) {
    HostBlock b = translate_tb_baseline(tb_of(src));
    int n = 0;
    for (const Item& it : b.items)
      if (it.kind == ItemKind::Host && it.guest == 0) ++n;
    return n;
  };
  EXPECT_EQ(count("add r1, r2, r3\nhalt\n"), 5);
  EXPECT_GE(count("cmp r1, r2\nhalt\n"), 8);
}

TEST(TranslateRules, StaticHostCountNotAboveBaselineOnRuleCoveredCode) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    std::vector<GuestInstr> tb = random_block(seed);
    HostBlock r = translate_tb_rules(tb, starter());
    HostBlock base = translate_tb_baseline(tb);
    for (std::size_t g = 0; g < tb.size(); ++g) {
      if (!r.rule_covered[g] || r.span[g] != 1) continue;
      auto host_of = [&](const HostBlock& b) {
        int n = 0;
        for (const Item& it : b.items)
          if (it.kind == ItemKind::Host && it.guest == static_cast<int>(g) && it.role == ItemRole::Body) ++n;
        return n;
      };
      EXPECT_LE(host_of(r), host_of(base)) << "seed " << seed << " guest " << g;
    }
  }
}

TEST(TranslateRules, HelpersFollowASave) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    HostBlock b = translate_tb_rules(random_block(seed), starter());
    for (std::size_t i = 0; i < b.items.size(); ++i) {
      if (b.items[i].kind != ItemKind::Helper) continue;
      ASSERT_GT(i, 0u);
      EXPECT_EQ(b.items[i - 1].kind, ItemKind::Sync) << "seed " << seed;
      EXPECT_EQ(b.items[i - 1].sync.kind, SyncKind::Save);
    }
  }
}
