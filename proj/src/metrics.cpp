#include "sdbt/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sdbt {

Ratio Ratio::of(std::uint64_t n, std::uint64_t d) {
  if (d == 0) throw std::domain_error("zero denominator");
  std::uint64_t g = std::gcd(n, d);
  if (g == 0) return {0, 1};
  return {n / g, d / g};
}

Ratio Ratio::operator*(const Ratio& o) const {
  // Cross-reduce first so the products stay small.
  Ratio a = of(num, o.den);
  Ratio b = of(o.num, den);
  return of(a.num * b.num, a.den * b.den);
}

Ratio Ratio::operator/(const Ratio& o) const {
  if (o.num == 0) throw std::domain_error("division by zero ratio");
  return *this * Ratio{o.den, o.num};
}

namespace {

double pct(std::uint64_t n, std::uint64_t d) { return 100.0 * static_cast<double>(n) / static_cast<double>(d); }

std::uint64_t tag(const VmCounters& v, HostTag t) { return v.by_tag[static_cast<std::size_t>(t)]; }

}  // namespace

Metrics compute_metrics(const ExecCounters& c, const ExecCounters* baseline) {
  if (c.guest_num == 0) throw EmptyRun();
  Metrics m;
  m.guest_num = c.guest_num;
  m.host_total = c.vm.total();
  m.by_tag = c.vm.by_tag;
  m.sync_num = c.vm.sync_ops;
  m.sync_instrs = tag(c.vm, HostTag::Sync);
  m.host_per_guest = static_cast<double>(m.host_total) / static_cast<double>(m.guest_num);
  Ratio guest = Ratio::of(m.guest_num, 1);
  if (m.sync_num > 0) {
    Ratio overhead = Ratio::of(m.sync_instrs, m.sync_num);
    m.sync_overhead = overhead.value();
    m.sync_per_guest = (Ratio::of(m.sync_num, 1) * overhead / guest).value();
  }
  m.sync_per_guest_direct = Ratio::of(m.sync_instrs, m.guest_num).value();
  m.pct_system = pct(c.system, c.guest_num);
  m.pct_memory = pct(c.memory, c.guest_num);
  m.pct_interrupt_check = pct(c.checks, c.guest_num);
  m.rule_coverage = pct(c.rule_covered, c.guest_num);
  if (baseline && m.host_total > 0)
    m.speedup = static_cast<double>(baseline->vm.total()) / static_cast<double>(m.host_total);
  m.context_switches = c.context_switches;
  m.chained = c.chained;
  m.translations = c.translations;
  m.tlb_hits = c.tlb_hits;
  m.tlb_misses = c.tlb_misses;
  m.interrupts = c.interrupts;
  m.exceptions = c.exceptions;
  m.max_irq_latency = c.max_irq_latency;
  m.stale_ccr_reads = c.vm.stale_ccr_reads;
  return m;
}

OracleCategories oracle_categories(const GuestProgram& program, const InterpResult& r) {
  OracleCategories o;
  o.guest_num = r.retired;
  const GuestInstr* prev = nullptr;
  int len = 0;
  auto starts_tb = [&](std::uint32_t pc) {
    return !prev || ends_block(*prev) || len == kMaxTbLength || pc != prev->addr + 4;
  };
  for (const TraceEntry& t : r.trace) {
    const GuestInstr* g = program.find(t.pc);
    if (!g) throw std::logic_error("trace names an address with no instruction");
    if (starts_tb(t.pc)) {
      ++o.tb_entries;
      len = 0;
    }
    ++len;
    Category cat = classify(*g);
    if (cat == Category::MemoryAccess) ++o.memory;
    if (cat == Category::SystemLevel) ++o.system;
    prev = g;
  }
  // The halt is not retired but its block still runs its check.
  if (r.status == RunStatus::Halted && starts_tb(r.state.pc)) ++o.tb_entries;
  if (o.guest_num == 0) throw EmptyRun();
  o.pct_memory = pct(o.memory, o.guest_num);
  o.pct_system = pct(o.system, o.guest_num);
  o.pct_interrupt_check = pct(o.tb_entries, o.guest_num);
  return o;
}

std::vector<DiffConfig> ablation_matrix() {
  std::vector<DiffConfig> m = standard_configs();
  m.push_back({Pipeline::Rules, OptLevel::Scheduling, false});
  return m;
}

Report run_experiment(const Workload& w, const RuleSet& rules, const std::vector<DiffConfig>& matrix,
                      std::optional<std::uint64_t> fuel) {
  Report rep;
  std::uint64_t f = fuel.value_or(w.fuel);
  Machine m;
  InterpResult ref;
  std::string setup_error;
  try {
    m = build_machine(w);
    InterpOptions io;
    io.fuel = f;
    io.record_trace = false;
    ref = run_reference(w.program, m, io);
    if (w.expected) {
      std::string why = expected_diff(*w.expected, expected_from(ref));
      if (!why.empty()) setup_error = "oracle disagrees with the committed expected state (" + why + ")";
    }
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  std::optional<ExecCounters> base;
  std::vector<ExecCounters> counters;
  for (const DiffConfig& c : matrix) {
    Cell cell;
    cell.config = c;
    cell.workload = w.name;
    ExecCounters ctr;
    if (!setup_error.empty()) {
      cell.error = setup_error;
    } else {
      try {
        DbtResult got = run_dbt(w.program, m, rules, RuntimeConfig{c.pipeline, c.level, c.chaining, f, {}});
        ctr = got.counters;
        cell.status = run_status_name(got.status);
        std::string why;
        if (got.status != ref.status) {
          why = "status differs from the oracle (" + std::string(run_status_name(ref.status)) + ")";
        } else if (ref.status == RunStatus::Halted) {
          why = quiescent_diff(got.state, got.mem, ref.state, ref.mem);
          if (why.empty() && got.counters.guest_num != ref.retired) why = "retired count differs";
          if (why.empty() && w.expected) {
            why = expected_diff(*w.expected, expected_state(got.status, got.state, got.mem, got.counters.guest_num,
                                                            got.counters.interrupts));
            if (!why.empty()) why = "differs from the expected state (" + why + ")";
          }
        }
        cell.error = why;
        cell.metrics = compute_metrics(got.counters);
        cell.ok = why.empty();
        if (cell.ok && c.pipeline == Pipeline::Baseline && !base) base = got.counters;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    }
    counters.push_back(ctr);
    rep.cells.push_back(std::move(cell));
  }
  if (base)
    for (std::size_t i = 0; i < rep.cells.size(); ++i)
      if (rep.cells[i].metrics.host_total > 0)
        rep.cells[i].metrics.speedup = compute_metrics(counters[i], &*base).speedup;
  return rep;
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "rows") return ReportFormat::Rows;
  if (s == "table") return ReportFormat::Table;
  throw std::invalid_argument("unknown report format '" + s + "' (rows|table)");
}

namespace {

using nlohmann::json;

json to_json(const Cell& c) {
  const Metrics& m = c.metrics;
  json tags = json::object();
  for (int t = 0; t < kNumHostTags; ++t)
    tags[std::string(host_tag_name(static_cast<HostTag>(t)))] = m.by_tag[static_cast<std::size_t>(t)];
  json j = {
      {"schema", kReportSchema},
      {"workload", c.workload},
      {"pipeline", c.config.pipeline == Pipeline::Baseline ? "baseline" : "rules"},
      {"level", std::string(opt_level_name(c.config.level))},
      {"chaining", c.config.chaining},
      {"ok", c.ok},
      {"status", c.status},
      {"error", c.error},
      {"guest_num", m.guest_num},
      {"host_total", m.host_total},
      {"host_by_tag", tags},
      {"sync_num", m.sync_num},
      {"sync_instrs", m.sync_instrs},
      {"host_per_guest", m.host_per_guest},
      {"sync_overhead", m.sync_overhead},
      {"sync_per_guest", m.sync_per_guest},
      {"pct_system", m.pct_system},
      {"pct_memory", m.pct_memory},
      {"pct_interrupt_check", m.pct_interrupt_check},
      {"rule_coverage", m.rule_coverage},
      {"speedup_proxy", m.speedup ? json(*m.speedup) : json(nullptr)},
      {"context_switches", m.context_switches},
      {"chained", m.chained},
      {"translations", m.translations},
      {"tlb_hits", m.tlb_hits},
      {"tlb_misses", m.tlb_misses},
      {"interrupts", m.interrupts},
      {"exceptions", m.exceptions},
      {"max_irq_latency", m.max_irq_latency},
      {"stale_ccr_reads", m.stale_ccr_reads},
  };
  return j;
}

Cell from_json(const json& j) {
  if (j.at("schema").get<int>() != kReportSchema) throw std::invalid_argument("unsupported report schema");
  Cell c;
  c.workload = j.at("workload");
  std::string p = j.at("pipeline");
  if (p != "baseline" && p != "rules") throw std::invalid_argument("unknown pipeline '" + p + "'");
  c.config.pipeline = p == "baseline" ? Pipeline::Baseline : Pipeline::Rules;
  c.config.level = parse_opt_level(j.at("level").get<std::string>());
  c.config.chaining = j.at("chaining");
  c.ok = j.at("ok");
  c.status = j.at("status");
  c.error = j.at("error");
  Metrics& m = c.metrics;
  m.guest_num = j.at("guest_num");
  m.host_total = j.at("host_total");
  for (int t = 0; t < kNumHostTags; ++t)
    m.by_tag[static_cast<std::size_t>(t)] = j.at("host_by_tag").at(std::string(host_tag_name(static_cast<HostTag>(t))));
  m.sync_num = j.at("sync_num");
  m.sync_instrs = j.at("sync_instrs");
  m.host_per_guest = j.at("host_per_guest");
  m.sync_overhead = j.at("sync_overhead");
  m.sync_per_guest = j.at("sync_per_guest");
  m.sync_per_guest_direct = m.guest_num ? Ratio::of(m.sync_instrs, m.guest_num).value() : 0;
  m.pct_system = j.at("pct_system");
  m.pct_memory = j.at("pct_memory");
  m.pct_interrupt_check = j.at("pct_interrupt_check");
  m.rule_coverage = j.at("rule_coverage");
  if (!j.at("speedup_proxy").is_null()) m.speedup = j.at("speedup_proxy").get<double>();
  m.context_switches = j.at("context_switches");
  m.chained = j.at("chained");
  m.translations = j.at("translations");
  m.tlb_hits = j.at("tlb_hits");
  m.tlb_misses = j.at("tlb_misses");
  m.interrupts = j.at("interrupts");
  m.exceptions = j.at("exceptions");
  m.max_irq_latency = j.at("max_irq_latency");
  m.stale_ccr_reads = j.at("stale_ccr_reads");
  return c;
}

std::string table(const Report& r) {
  std::ostringstream o;
  o << std::left << std::setw(10) << "workload" << std::setw(26) << "config" << std::right << std::setw(8)
    << "guest" << std::setw(10) << "host" << std::setw(9) << "host/g" << std::setw(9) << "sync/g" << std::setw(8)
    << "sys%" << std::setw(8) << "mem%" << std::setw(8) << "chk%" << std::setw(8) << "rule%" << std::setw(10)
    << "speedup*" << "  result\n";
  o << std::fixed;
  for (const Cell& c : r.cells) {
    const Metrics& m = c.metrics;
    o << std::left << std::setw(10) << c.workload << std::setw(26) << config_name(c.config) << std::right
      << std::setw(8) << m.guest_num << std::setw(10) << m.host_total << std::setprecision(3) << std::setw(9)
      << m.host_per_guest << std::setw(9) << m.sync_per_guest << std::setprecision(2) << std::setw(8)
      << m.pct_system << std::setw(8) << m.pct_memory << std::setw(8) << m.pct_interrupt_check << std::setw(8)
      << m.rule_coverage << std::setprecision(3) << std::setw(10);
    if (m.speedup) o << *m.speedup;
    else o << "-";
    o << "  " << (c.ok ? "ok" : "FAILED: " + c.error) << "\n";
  }
  o << "* speedup is a proxy: baseline host instructions / host instructions, not wall time.\n";
  return o.str();
}

}  // namespace

std::string format_report(const Report& r, ReportFormat f) {
  if (f == ReportFormat::Table) return table(r);
  std::string out;
  for (const Cell& c : r.cells) out += to_json(c).dump() + "\n";
  return out;
}

void write_report(const Report& r, ReportFormat f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << format_report(r, f);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

Report parse_rows(const std::string& text) {
  Report r;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      r.cells.push_back(from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("rows line " + std::to_string(n) + ": " + e.what());
    }
  }
  return r;
}

}  // namespace sdbt
