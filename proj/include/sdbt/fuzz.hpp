// Seeded random guest programs and differential checking against the
// reference interpreter.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdbt/runtime.hpp"
#include "sdbt/workload.hpp"

namespace sdbt {

// Handler addresses used by generated programs.
inline constexpr std::uint32_t kFuzzIrqHandler = 0x800;
inline constexpr std::uint32_t kFuzzSkipHandler = 0x900;
inline constexpr std::uint32_t kFuzzSvcHandler = 0xA00;
inline constexpr int kFuzzIrqVector = 5;
inline constexpr int kFuzzSvcVector = 7;

// A terminating program plus its machine setup. Handlers only touch r12/r13
// after stashing them in the scratch system registers.
Workload random_workload(std::uint64_t seed);

// Straight-line guest block ending in a terminator, for pass properties.
std::vector<GuestInstr> random_block(std::uint64_t seed);

struct DiffConfig {
  Pipeline pipeline = Pipeline::Rules;
  OptLevel level = OptLevel::Base;
  bool chaining = true;
};
std::vector<DiffConfig> standard_configs();
std::string config_name(const DiffConfig& c);

struct DiffReport {
  bool ok = true;
  std::string detail;  // first mismatch
};

// Runs every configuration against the oracle. Only halted runs are
// quiescent; both sides must agree on the status.
DiffReport diff_check(const Workload& w, const RuleSet& rules, const std::vector<DiffConfig>& configs,
                      std::uint64_t fuel);

}  // namespace sdbt
