// Reference interpreter: executes one guest instruction at a time directly
// on architectural state. It shares no code with the translator and serves as
// the differential oracle.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdbt/guest_isa.hpp"
#include "sdbt/machine.hpp"

namespace sdbt {

enum class RunStatus : std::uint8_t { Halted, FuelExhausted, UndefinedInstruction, UnconfiguredVector };
std::string_view run_status_name(RunStatus s);

struct TraceEntry {
  std::uint32_t pc = 0;
  bool executed = true;  // false when the condition failed
};

enum class StepEvent : std::uint8_t { Retired, Interrupt, Exception, Halt, Undefined };

struct InterpOptions {
  std::uint64_t fuel = 10'000;
  bool use_tlb = false;  // the oracle walks the page table on every access
  bool record_trace = true;
};

struct InterpResult {
  RunStatus status = RunStatus::Halted;
  GuestState state;
  PhysMemory mem;
  std::uint64_t retired = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t exceptions = 0;
  std::vector<TraceEntry> trace;  // retired instructions in order
  std::string error;
};

class Interpreter {
 public:
  Interpreter(const GuestProgram& program, Machine& machine, InterpOptions opts = {});

  // Executes one event: an interrupt delivery, a fault, or one instruction.
  StepEvent step();
  InterpResult run();

  std::uint64_t retired() const { return retired_; }

 private:
  bool exec(const GuestInstr& g);  // false when the instruction faulted
  std::uint32_t src2(const GuestInstr& g) const;

  const GuestProgram& program_;
  Machine& m_;
  InterpOptions opts_;
  Tlb tlb_;
  std::uint64_t retired_ = 0;
  std::uint64_t interrupts_ = 0;
  std::uint64_t exceptions_ = 0;
  std::vector<TraceEntry> trace_;
};

// Convenience wrapper: run a program on a copy of `machine`.
InterpResult run_reference(const GuestProgram& program, Machine machine, InterpOptions opts = {});

// Architectural ALU semantics, exposed for tests.
struct AluOut {
  std::uint32_t value = 0;
  std::uint8_t nzcv = 0;
};
AluOut guest_alu(Mnemonic op, std::uint32_t a, std::uint32_t b, std::uint8_t nzcv_in);

}  // namespace sdbt
