// Code cache, block chaining and the execution loop that moves guest state
// between the host registers and the emulator state area.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sdbt/interpreter.hpp"
#include "sdbt/optimizer.hpp"
#include "sdbt/translator.hpp"

namespace sdbt {

struct RuntimeConfig {
  Pipeline pipeline = Pipeline::Rules;
  OptLevel level = OptLevel::Scheduling;
  bool chaining = true;
  std::uint64_t fuel = 10'000;
  // Debug hook called after every block exit with the block's guest pc.
  std::function<void(std::uint32_t, const ExitDesc&, const EmuStateArea&)> on_exit;
};

struct ExecCounters {
  VmCounters vm;
  std::uint64_t guest_num = 0;  // retired guest instructions
  std::uint64_t rule_covered = 0;
  std::uint64_t memory = 0;     // retired memory-access instructions
  std::uint64_t system = 0;     // retired system-level instructions
  std::uint64_t checks = 0;     // interrupt checks executed
  std::uint64_t blocks = 0;     // block executions
  std::uint64_t context_switches = 0;
  std::uint64_t translations = 0;
  std::uint64_t chained = 0;    // block transitions through a chain link
  std::uint64_t tlb_hits = 0;
  std::uint64_t tlb_misses = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t exceptions = 0;
  std::uint64_t deferred_unpacks = 0;
  std::uint64_t max_irq_latency = 0;  // in block executions
};

struct DbtResult {
  RunStatus status = RunStatus::Halted;
  GuestState state;
  PhysMemory mem;
  ExecCounters counters;
  std::string error;
};

// Scan, translate and optimize the block at `pc`.
HostBlock translate_block(const GuestProgram& program, std::uint32_t pc, const RuleSet& rules, Pipeline pipeline,
                          OptLevel level);

class Runtime : public HelperHost {
 public:
  Runtime(const GuestProgram& program, Machine machine, const RuleSet& rules, RuntimeConfig cfg);
  ~Runtime() override;

  DbtResult run();
  bool call_helper(HelperId id, std::uint16_t guest, int& cost) override;

  // Cached translations, keyed by guest pc.
  std::size_t cache_size() const;
  const HostBlock* cached_block(std::uint32_t pc) const;

 private:
  struct Tb;
  Tb* lookup_or_translate(std::uint32_t pc);
  void chain(Tb& from, int exit, Tb& to);
  void flush_chains();
  void relower(Tb& tb);
  void exec_sync(const std::vector<SyncOp>& ops);
  void restore_from_area();
  void emergency_save();
  void unpack_ccr();
  bool irq_due() const;
  void update_pending(std::uint64_t retired);
  bool deliver_irq(std::uint32_t return_pc);
  void enter(int vector, std::uint32_t return_pc);

  const GuestProgram& program_;
  Machine m_;
  const RuleSet& rules_;
  RuntimeConfig cfg_;
  EmuStateArea area_;
  SystemState sys_;
  Tlb tlb_;
  VmContext ctx_;
  ExecCounters c_;
  std::map<std::uint32_t, std::unique_ptr<Tb>> cache_;
  Tb* current_ = nullptr;
  std::uint64_t block_base_ = 0;
  HelperResult last_helper_;
  bool flush_requested_ = false;
  std::uint64_t due_since_ = 0;  // block count when the head interrupt became deliverable
  bool due_seen_ = false;
};

DbtResult run_dbt(const GuestProgram& program, const Machine& machine, const RuleSet& rules,
                  const RuntimeConfig& cfg);

}  // namespace sdbt
