#include <gtest/gtest.h>

#include "sdbt/metrics.hpp"

using namespace sdbt;

namespace {

const RuleSet& starter() {
  static RuleSet r = load_rules(SDBT_SOURCE_DIR "/rules/starter.rules");
  return r;
}

Workload bundled(const std::string& name) { return load_workload(SDBT_SOURCE_DIR "/workloads/" + name + ".yaml"); }

ExecCounters counters(std::uint64_t guest, std::uint64_t sync_ops, std::uint64_t sync_instrs) {
  ExecCounters c;
  c.guest_num = guest;
  c.vm.sync_ops = sync_ops;
  c.vm.by_tag[static_cast<std::size_t>(HostTag::Sync)] = sync_instrs;
  c.vm.by_tag[static_cast<std::size_t>(HostTag::Translated)] = 2 * guest;
  return c;
}

}  // namespace

TEST(Metrics, FormulaExample) {
  Metrics m = compute_metrics(counters(30, 10, 30));
  EXPECT_EQ(m.sync_overhead, 3.0);
  EXPECT_EQ(m.sync_per_guest, 1.0);
  EXPECT_FALSE(m.speedup.has_value());
}

TEST(Metrics, ZeroSyncOpsAndEmptyRun) {
  EXPECT_EQ(compute_metrics(counters(30, 0, 0)).sync_per_guest, 0.0);
  EXPECT_THROW(compute_metrics(counters(0, 0, 0)), EmptyRun);
}

TEST(Metrics, FormulaMatchesDirectCountBitExactly) {
  // Values where naive floating point n * (s / n) / g drifts.
  for (std::uint64_t g : {3u, 7u, 1216u, 99991u})
    for (std::uint64_t n : {1u, 3u, 7u, 49u, 1000u})
      for (std::uint64_t s : {1u, 10u, 333u, 2581u, 123457u}) {
        Metrics m = compute_metrics(counters(g, n, s));
        EXPECT_EQ(m.sync_per_guest, m.sync_per_guest_direct) << g << " " << n << " " << s;
        EXPECT_EQ(m.sync_per_guest, static_cast<double>(s) / static_cast<double>(g));
      }
}

TEST(Metrics, SpeedupAgainstBaseline) {
  ExecCounters base = counters(10, 0, 0);
  base.vm.by_tag[0] = 100;
  ExecCounters run = counters(10, 0, 0);
  run.vm.by_tag[0] = 40;
  EXPECT_DOUBLE_EQ(*compute_metrics(run, &base).speedup, 2.5);
}

TEST(Ratio, ReducesAndMultiplies) {
  EXPECT_EQ(Ratio::of(6, 4), (Ratio{3, 2}));
  EXPECT_EQ(Ratio::of(3, 1) * Ratio::of(5, 6), (Ratio{5, 2}));
  EXPECT_EQ(Ratio::of(1, 2) / Ratio::of(1, 4), (Ratio{2, 1}));
  EXPECT_THROW(Ratio::of(1, 0), std::domain_error);
}

TEST(OracleCategories, Membound) {
  Workload w = bundled("membound");
  InterpResult r = run_reference(w.program, build_machine(w), InterpOptions{w.fuel, false, true});
  OracleCategories o = oracle_categories(w.program, r);
  // fill: 2 of 6 per iteration, copy: 4 of 10, plus one store at the end.
  EXPECT_EQ(o.memory, 64u * 2 + 64u * 4 + 1);
  EXPECT_EQ(o.guest_num, r.retired);
  EXPECT_EQ(o.system, 0u);
}

TEST(Experiment, MixedCategoriesEqualOracle) {
  Workload w = bundled("mixed");
  InterpResult r = run_reference(w.program, build_machine(w), InterpOptions{w.fuel, false, true});
  OracleCategories o = oracle_categories(w.program, r);
  Report rep = run_experiment(w, starter(), ablation_matrix());
  for (const Cell& c : rep.cells) {
    ASSERT_TRUE(c.ok) << config_name(c.config) << ": " << c.error;
    EXPECT_EQ(c.metrics.pct_memory, o.pct_memory);
    EXPECT_EQ(c.metrics.pct_system, o.pct_system);
    EXPECT_EQ(c.metrics.pct_interrupt_check, o.pct_interrupt_check) << config_name(c.config);
  }
}

TEST(Experiment, SingleCellAndDeterminism) {
  Workload w = bundled("alu-loop");
  std::vector<DiffConfig> one = {{Pipeline::Rules, OptLevel::Scheduling, true}};
  Report a = run_experiment(w, starter(), one);
  ASSERT_EQ(a.cells.size(), 1u);
  EXPECT_TRUE(a.cells[0].ok);
  Report b = run_experiment(w, starter(), one);
  EXPECT_EQ(format_report(a, ReportFormat::Rows), format_report(b, ReportFormat::Rows));
}

TEST(Experiment, FailedCellDoesNotAbortMatrix) {
  Workload w = bundled("alu-loop");
  w.expected->r[0] ^= 1;  // corrupt the committed state
  Report r = run_experiment(w, starter(), standard_configs());
  ASSERT_EQ(r.cells.size(), standard_configs().size());
  for (const Cell& c : r.cells) {
    EXPECT_FALSE(c.ok);
    EXPECT_NE(c.error.find("expected"), std::string::npos);
  }
}

TEST(Report, RowsRoundTripBitExactly) {
  Report r = run_experiment(bundled("sysmix"), starter(), ablation_matrix());
  std::string rows = format_report(r, ReportFormat::Rows);
  Report back = parse_rows(rows);
  ASSERT_EQ(back.cells.size(), r.cells.size());
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const Metrics& a = r.cells[i].metrics;
    const Metrics& b = back.cells[i].metrics;
    EXPECT_EQ(a.host_per_guest, b.host_per_guest);
    EXPECT_EQ(a.sync_per_guest, b.sync_per_guest);
    EXPECT_EQ(a.sync_overhead, b.sync_overhead);
    EXPECT_EQ(a.pct_interrupt_check, b.pct_interrupt_check);
    EXPECT_EQ(a.speedup, b.speedup);
    EXPECT_EQ(a.by_tag, b.by_tag);
  }
  EXPECT_EQ(format_report(back, ReportFormat::Rows), rows);
}

TEST(Report, SchemaAndTableShape) {
  std::vector<DiffConfig> two = {{Pipeline::Baseline, OptLevel::Base, true}, {Pipeline::Rules, OptLevel::Base, true}};
  Report r = run_experiment(bundled("alu-loop"), starter(), two);
  std::string rows = format_report(r, ReportFormat::Rows);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 2);
  EXPECT_NE(rows.find("\"schema\":" + std::to_string(kReportSchema)), std::string::npos);
  std::string table = format_report(r, ReportFormat::Table);
  EXPECT_EQ(table.rfind("workload", 0), 0u);
  EXPECT_NE(table.find("proxy"), std::string::npos);
  EXPECT_THROW(parse_rows("{\"schema\": 99}\n"), std::invalid_argument);
  EXPECT_THROW(parse_report_format("csv"), std::invalid_argument);
  EXPECT_THROW(write_report(r, ReportFormat::Rows, "/nonexistent/dir/out.jsonl"), std::runtime_error);
}
