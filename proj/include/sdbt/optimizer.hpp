// Optimizations over the sync operations of translated blocks.
//
// Levels are cumulative: Reduction shrinks CCR syncs to the packed form,
// Elimination removes redundant restores, merges adjacent memory brackets and
// drops boundary syncs killed by the successor, Scheduling moves flag
// definitions next to their use and relocates the interrupt check.
#pragma once

#include <cstdint>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "sdbt/translator.hpp"

namespace sdbt {

enum class OptLevel : std::uint8_t { Base, Reduction, Elimination, Scheduling };
std::string_view opt_level_name(OptLevel l);
OptLevel parse_opt_level(std::string_view s);

void pass_reduce(HostBlock& b);
void pass_eliminate_restores(HostBlock& b);
void pass_merge_memory(HostBlock& b);
void pass_inter_tb_entry(HostBlock& b);
void pass_schedule_dbu(HostBlock& b);
void pass_trim_dead_ccr(HostBlock& b);
void pass_schedule_irq(HostBlock& b);

// Runs every pass of `level` and below until nothing changes.
void run_pipeline(HostBlock& b, OptLevel level);

// State the block overwrites before reading it, in execution order.
struct TbSummary {
  bool ccr_killed = false;
  RegMask gprs_killed = 0;  // resident registers only
};
TbSummary summarize(const HostBlock& b);

// Chained edges between translated blocks.
struct ChainGraph {
  struct Edge {
    int from = 0;
    int exit = 0;
    int to = 0;
  };
  std::vector<const HostBlock*> nodes;
  std::vector<Edge> edges;
};

// Boundary-save components each chained edge can omit, keyed by (from, exit).
std::map<std::pair<int, int>, Components> pass_inter_tb(const ChainGraph& g);
Components edge_drop(const TbSummary& target);

// Segment starts in current execution order.
std::vector<int> segment_order(const HostBlock& b);

}  // namespace sdbt
