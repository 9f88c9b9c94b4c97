// Command-line driver: run workloads, ablate, fuzz against the oracle, and
// regenerate expected states.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sdbt/metrics.hpp"

namespace {

using namespace sdbt;

struct Common {
  std::string rules = SDBT_SOURCE_DIR "/rules/starter.rules";
  std::string format = "table";
  std::string out;
  std::uint64_t fuel = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--rules", c.rules, "translation rules file");
  cmd->add_option("--format", c.format, "rows or table")->check(CLI::IsMember({"rows", "table"}));
  cmd->add_option("--report", c.out, "write the report here instead of stdout");
  cmd->add_option("--fuel", c.fuel, "retired-instruction limit (default: the workload's)");
}

// Exit 0 only if every cell matched the oracle.
int emit(const Report& r, const Common& c) {
  ReportFormat f = parse_report_format(c.format);
  if (c.out.empty()) std::cout << format_report(r, f);
  else write_report(r, f, c.out);
  bool ok = !r.cells.empty();
  for (const Cell& cell : r.cells) ok = ok && cell.ok;
  return ok ? 0 : 1;
}

std::optional<std::uint64_t> fuel_of(const Common& c) {
  return c.fuel ? std::optional<std::uint64_t>(c.fuel) : std::nullopt;
}

// Replaces a trailing top-level `expected:` block, or appends one.
void write_expected(const std::string& path, const ExpectedState& e) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  std::size_t at = text.rfind("\nexpected:");
  if (text.rfind("expected:", 0) == 0) at = 0;
  if (at != std::string::npos) text.resize(at == 0 ? 0 : at + 1);
  if (!text.empty() && text.back() != '\n') text += '\n';
  text += expected_yaml(e) + "\n";
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale system-level binary translator"};
  app.require_subcommand(1);
  int rc = 0;

  Common run_c;
  std::string run_path, pipeline = "rules", level = "scheduling";
  bool no_chain = false;
  auto* run = app.add_subcommand("run", "run one workload under one configuration");
  run->add_option("--workload", run_path, "workload YAML")->required();
  run->add_option("--pipeline", pipeline, "rules or baseline")->check(CLI::IsMember({"rules", "baseline"}));
  run->add_option("--opt", level, "base, reduction, elimination or scheduling");
  run->add_flag("--no-chain", no_chain, "disable block chaining");
  add_common(run, run_c);
  run->callback([&] {
    Workload w = load_workload(run_path);
    DiffConfig cfg{pipeline == "baseline" ? Pipeline::Baseline : Pipeline::Rules, parse_opt_level(level), !no_chain};
    rc = emit(run_experiment(w, load_rules(run_c.rules), {cfg}, fuel_of(run_c)), run_c);
  });

  Common ab_c;
  std::vector<std::string> ab_paths;
  auto* ablate = app.add_subcommand("ablate", "run workloads under every optimization level");
  ablate->add_option("--workload", ab_paths, "workload YAML (repeatable)")->required();
  add_common(ablate, ab_c);
  ablate->callback([&] {
    RuleSet rules = load_rules(ab_c.rules);
    Report all;
    for (const auto& p : ab_paths) {
      Report r = run_experiment(load_workload(p), rules, ablation_matrix(), fuel_of(ab_c));
      all.cells.insert(all.cells.end(), r.cells.begin(), r.cells.end());
    }
    rc = emit(all, ab_c);
  });

  std::string dt_rules = SDBT_SOURCE_DIR "/rules/starter.rules";
  std::uint64_t seeds = 1000, start = 1, dt_fuel = 10'000;
  auto* diff = app.add_subcommand("diff-test", "differential test on seeded random programs");
  diff->add_option("--count", seeds, "number of programs");
  diff->add_option("--seed", start, "first seed");
  diff->add_option("--fuel", dt_fuel, "retired-instruction limit");
  diff->add_option("--rules", dt_rules, "translation rules file");
  diff->callback([&] {
    RuleSet rules = load_rules(dt_rules);
    std::vector<DiffConfig> configs = ablation_matrix();
    std::uint64_t failed = 0;
    for (std::uint64_t s = start; s < start + seeds; ++s) {
      DiffReport r = diff_check(random_workload(s), rules, configs, dt_fuel);
      if (!r.ok) {
        ++failed;
        std::cout << "FAIL " << r.detail << "\n";
      }
    }
    std::cout << seeds - failed << "/" << seeds << " programs match the oracle\n";
    rc = failed ? 1 : 0;
  });

  std::string or_path;
  bool write = false;
  auto* oracle = app.add_subcommand("oracle", "run the reference interpreter and print the expected state");
  oracle->add_option("--workload", or_path, "workload YAML")->required();
  oracle->add_flag("--write", write, "store the expected state in the workload file");
  oracle->callback([&] {
    Workload w = load_workload(or_path);
    InterpOptions io;
    io.fuel = w.fuel;
    InterpResult r = run_reference(w.program, build_machine(w), io);
    ExpectedState e = expected_from(r);
    if (write) write_expected(or_path, e);
    else std::cout << expected_yaml(e) << "\n";
    OracleCategories cat = oracle_categories(w.program, r);
    std::cout << "# retired " << r.retired << ", system " << cat.pct_system << "%, memory " << cat.pct_memory
              << "%, interrupt-check " << cat.pct_interrupt_check << "%\n";
    if (w.expected && !write) {
      std::string why = expected_diff(*w.expected, e);
      if (!why.empty()) {
        std::cout << "committed expected state is stale: " << why << "\n";
        rc = 1;
      }
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
