#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdbt/metrics.hpp"

namespace py = pybind11;
using namespace sdbt;

namespace {

std::optional<std::uint64_t> fuel_opt(std::uint64_t fuel) {
  return fuel ? std::optional<std::uint64_t>(fuel) : std::nullopt;
}

std::string run(const std::string& workload, const std::string& rules, const std::string& pipeline,
                const std::string& level, bool chaining, std::uint64_t fuel) {
  if (pipeline != "rules" && pipeline != "baseline") throw std::invalid_argument("pipeline must be rules or baseline");
  DiffConfig c{pipeline == "baseline" ? Pipeline::Baseline : Pipeline::Rules, parse_opt_level(level), chaining};
  Report r = run_experiment(load_workload(workload), load_rules(rules), {c}, fuel_opt(fuel));
  return format_report(r, ReportFormat::Rows);
}

std::string ablate(const std::string& workload, const std::string& rules, std::uint64_t fuel) {
  Report r = run_experiment(load_workload(workload), load_rules(rules), ablation_matrix(), fuel_opt(fuel));
  return format_report(r, ReportFormat::Rows);
}

std::vector<std::string> diff_test(std::uint64_t seeds, std::uint64_t start, std::uint64_t fuel,
                                   const std::string& rules) {
  RuleSet rs = load_rules(rules);
  std::vector<std::string> failures;
  for (std::uint64_t s = start; s < start + seeds; ++s) {
    DiffReport d = diff_check(random_workload(s), rs, ablation_matrix(), fuel);
    if (!d.ok) failures.push_back(d.detail);
  }
  return failures;
}

py::dict oracle(const std::string& workload) {
  Workload w = load_workload(workload);
  InterpOptions io;
  io.fuel = w.fuel;
  InterpResult r = run_reference(w.program, build_machine(w), io);
  ExpectedState e = expected_from(r);
  OracleCategories cat = oracle_categories(w.program, r);
  py::dict d;
  d["status"] = std::string(run_status_name(e.status));
  d["r"] = std::vector<std::uint32_t>(e.r.begin(), e.r.end());
  d["pc"] = e.pc;
  d["nzcv"] = e.nzcv;
  d["retired"] = e.retired;
  d["interrupts"] = e.interrupts;
  d["memory_hash"] = e.memory_hash;
  d["pct_system"] = cat.pct_system;
  d["pct_memory"] = cat.pct_memory;
  d["pct_interrupt_check"] = cat.pct_interrupt_check;
  d["matches_committed"] = !w.expected || expected_diff(*w.expected, e).empty();
  return d;
}

}  // namespace

PYBIND11_MODULE(_sdbt, m) {
  m.doc() = "system-level binary translator core";
  m.attr("REPORT_SCHEMA") = kReportSchema;
  m.def("run", &run, py::arg("workload"), py::arg("rules"), py::arg("pipeline") = "rules",
        py::arg("level") = "scheduling", py::arg("chaining") = true, py::arg("fuel") = 0,
        "Run one configuration; returns report rows (JSON lines).");
  m.def("ablate", &ablate, py::arg("workload"), py::arg("rules"), py::arg("fuel") = 0,
        "Run the ablation matrix; returns report rows (JSON lines).");
  m.def("diff_test", &diff_test, py::arg("seeds"), py::arg("start"), py::arg("fuel"), py::arg("rules"),
        "Differential test on seeded random programs; returns mismatch descriptions.");
  m.def("oracle", &oracle, py::arg("workload"), "Reference-interpreter final state and category fractions.");
  py::register_exception<WorkloadError>(m, "WorkloadError", PyExc_ValueError);
}
