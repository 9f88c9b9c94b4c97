// Metrics derived from execution counters, experiment matrices and reports.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdbt/fuzz.hpp"
#include "sdbt/runtime.hpp"
#include "sdbt/workload.hpp"

namespace sdbt {

inline constexpr int kReportSchema = 1;

class EmptyRun : public std::runtime_error {
 public:
  EmptyRun() : std::runtime_error("no guest instructions retired") {}
};

// Exact non-negative fraction; keeps the sync formula bit-exact.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  static Ratio of(std::uint64_t n, std::uint64_t d);
  Ratio operator*(const Ratio& o) const;
  Ratio operator/(const Ratio& o) const;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct Metrics {
  std::uint64_t guest_num = 0;
  std::uint64_t host_total = 0;
  std::uint64_t sync_num = 0;
  std::uint64_t sync_instrs = 0;  // Sync-tag instructions executed
  std::array<std::uint64_t, kNumHostTags> by_tag{};
  double host_per_guest = 0;
  double sync_overhead = 0;        // host instructions per coordination
  double sync_per_guest = 0;       // sync_num * sync_overhead / guest_num
  double sync_per_guest_direct = 0;  // Sync-tag total / guest_num
  double pct_system = 0;
  double pct_memory = 0;
  double pct_interrupt_check = 0;
  double rule_coverage = 0;        // percent of retired instructions
  std::optional<double> speedup;   // baseline host total / this host total
  std::uint64_t context_switches = 0;
  std::uint64_t chained = 0;
  std::uint64_t translations = 0;
  std::uint64_t tlb_hits = 0;
  std::uint64_t tlb_misses = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t exceptions = 0;
  std::uint64_t max_irq_latency = 0;
  std::uint64_t stale_ccr_reads = 0;
};

Metrics compute_metrics(const ExecCounters& c, const ExecCounters* baseline = nullptr);

// Category counts straight from the reference trace. Interrupt checks are
// counted as translation-block entries, with blocks cut exactly where the
// translator cuts them.
struct OracleCategories {
  std::uint64_t guest_num = 0;
  std::uint64_t memory = 0;
  std::uint64_t system = 0;
  std::uint64_t tb_entries = 0;
  double pct_memory = 0;
  double pct_system = 0;
  double pct_interrupt_check = 0;
};
OracleCategories oracle_categories(const GuestProgram& program, const InterpResult& r);

struct Cell {
  DiffConfig config;
  std::string workload;
  bool ok = false;           // ran and matched the oracle
  std::string status;
  std::string error;
  Metrics metrics;
};

struct Report {
  std::vector<Cell> cells;
};

std::vector<DiffConfig> ablation_matrix();

// Runs each configuration on a fresh machine and checks it against the
// reference interpreter. The first Baseline cell anchors the speedup.
Report run_experiment(const Workload& w, const RuleSet& rules, const std::vector<DiffConfig>& matrix,
                      std::optional<std::uint64_t> fuel = std::nullopt);

enum class ReportFormat { Rows, Table };
ReportFormat parse_report_format(const std::string& s);
std::string format_report(const Report& r, ReportFormat f);
void write_report(const Report& r, ReportFormat f, const std::string& path);
// Reads the rows format back.
Report parse_rows(const std::string& text);

}  // namespace sdbt
