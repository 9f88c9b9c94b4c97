// Workload configuration files and machine construction.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdbt/interpreter.hpp"
#include "sdbt/machine.hpp"

namespace sdbt {

class WorkloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PageMapping {
  std::uint32_t gva = 0;
  std::uint32_t frame = 0;
  bool writable = true;
};

// Final state the reference interpreter reaches, committed with the workload.
struct ExpectedState {
  RunStatus status = RunStatus::Halted;
  std::array<std::uint32_t, kNumGuestRegs> r{};
  std::uint32_t pc = 0;
  std::uint8_t nzcv = 0;
  std::uint64_t retired = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t memory_hash = 0;
};

struct Workload {
  std::string name;
  std::filesystem::path program_path;
  GuestProgram program;
  // Identity map [0, identity_end) unless explicit mappings are given.
  std::uint32_t identity_end = 0x00100000;
  std::vector<PageMapping> mappings;
  std::uint32_t table_region = 0x00F00000;
  std::vector<InterruptEvent> interrupts;
  HandlerTable handlers;
  std::uint64_t fuel = 10'000;
  Mode mode = Mode::Privileged;
  std::map<int, std::uint32_t> regs;
  std::optional<ExpectedState> expected;
};

Workload load_workload(const std::filesystem::path& path);
Workload parse_workload(const std::string& yaml_text, const std::filesystem::path& base_dir);
Machine build_machine(const Workload& w);

// Machine for a bare program: identity-mapped low memory, privileged mode.
Machine default_machine(const GuestProgram& program);

// FNV-1a over the non-zero words of memory.
std::uint64_t memory_hash(const PhysMemory& mem);

ExpectedState expected_state(RunStatus status, const GuestState& s, const PhysMemory& mem, std::uint64_t retired,
                             std::uint64_t interrupts);
ExpectedState expected_from(const InterpResult& r);
// Names the first field that differs; empty when equal.
std::string expected_diff(const ExpectedState& want, const ExpectedState& got);
std::string expected_yaml(const ExpectedState& e);

// Quiescent-point comparison. Banked and scratch system registers are
// excluded. Returns an empty string when equal.
std::string quiescent_diff(const GuestState& a, const PhysMemory& ma, const GuestState& b, const PhysMemory& mb);

}  // namespace sdbt
