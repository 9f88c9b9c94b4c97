#include "sdbt/runtime.hpp"

#include <algorithm>

namespace sdbt {

struct Runtime::Tb {
  HostBlock block;
  LoweredBlock code;
  std::map<int, Tb*> links;           // chained exits
  std::map<int, Components> drop;     // boundary-save components omitted per chained exit
};

HostBlock translate_block(const GuestProgram& program, std::uint32_t pc, const RuleSet& rules, Pipeline pipeline,
                          OptLevel level) {
  std::vector<GuestInstr> tb = scan_tb(program, pc);
  if (tb.empty()) throw std::invalid_argument("no guest instruction at the block address");
  if (pipeline == Pipeline::Baseline) return translate_tb_baseline(tb);
  HostBlock b = translate_tb_rules(tb, rules);
  run_pipeline(b, level);
  return b;
}

Runtime::Runtime(const GuestProgram& program, Machine machine, const RuleSet& rules, RuntimeConfig cfg)
    : program_(program), m_(std::move(machine)), rules_(rules), cfg_(cfg) {
  load_state(m_.state, area_, sys_);
  ctx_.area = &area_;
}

Runtime::~Runtime() = default;

std::size_t Runtime::cache_size() const { return cache_.size(); }

const HostBlock* Runtime::cached_block(std::uint32_t pc) const {
  auto it = cache_.find(pc);
  return it == cache_.end() ? nullptr : &it->second->block;
}

Runtime::Tb* Runtime::lookup_or_translate(std::uint32_t pc) {
  auto it = cache_.find(pc);
  if (it != cache_.end()) return it->second.get();
  if (!program_.find(pc)) return nullptr;
  auto tb = std::make_unique<Tb>();
  tb->block = translate_block(program_, pc, rules_, cfg_.pipeline, cfg_.level);
  tb->code = lower_block(tb->block);
  ++c_.translations;
  ++c_.context_switches;
  return cache_.emplace(pc, std::move(tb)).first->second.get();
}

void Runtime::relower(Tb& tb) { tb.code = lower_block(tb.block, tb.drop); }

void Runtime::chain(Tb& from, int exit, Tb& to) {
  from.links[exit] = &to;
  if (cfg_.level >= OptLevel::Elimination && from.block.pipeline == Pipeline::Rules &&
      to.block.pipeline == Pipeline::Rules) {
    Components d = edge_drop(summarize(to.block));
    if (!d.empty()) {
      from.drop[exit] = d;
      relower(from);
    }
  }
}

void Runtime::flush_chains() {
  for (auto& [pc, tb] : cache_) {
    (void)pc;
    tb->links.clear();
    if (!tb->drop.empty()) {
      tb->drop.clear();
      relower(*tb);
    }
  }
}

void Runtime::exec_sync(const std::vector<SyncOp>& ops) {
  std::vector<HostInstr> code;
  for (const SyncOp& op : ops) {
    auto part = lower_sync(op);
    code.insert(code.end(), part.begin(), part.end());
  }
  code.push_back(tagged(h::exit(0), HostTag::Chain));
  vm_execute(code, ctx_, *this);
  // The exit is plumbing for running a fragment, not a block transition.
  --ctx_.counters.by_tag[static_cast<std::size_t>(HostTag::Chain)];
}

// Path 2 entry: reload the resident registers and FLAGS from the area.
void Runtime::restore_from_area() {
  SyncMode mode = area_.packed_fresh() ? SyncMode::Packed : SyncMode::Full;
  exec_sync({SyncOp{SyncKind::Restore, Components{kResidentMask, true, false}, mode, SyncCause::TbBoundary, 0}});
}

// Fuel ran out on a chained edge whose save omitted components.
void Runtime::emergency_save() {
  exec_sync({SyncOp{SyncKind::Save, Components{kResidentMask, true, false}, SyncMode::Full, SyncCause::TbBoundary, 0}});
}

// The packed CCR is newer than the per-flag slots: unpack before the runtime
// reads the flags.
void Runtime::unpack_ccr() {
  if (area_.flags_fresh()) return;
  exec_sync({SyncOp{SyncKind::Restore, Components{0, true, false}, SyncMode::Packed, SyncCause::InterruptCheck, 0},
             SyncOp{SyncKind::Save, Components{0, true, false}, SyncMode::Full, SyncCause::InterruptCheck, 0}});
  ++c_.deferred_unpacks;
}

bool Runtime::irq_due() const { return !sys_.irq_masked && m_.irq.pending(c_.guest_num).has_value(); }

void Runtime::update_pending(std::uint64_t retired) {
  bool due = !sys_.irq_masked && m_.irq.pending(retired).has_value();
  area_.set(Slot::Pending, due ? 1 : 0);
  // Latency runs from the point the interrupt became deliverable; a masked
  // stretch (inside a handler) restarts it.
  if (!due) {
    due_seen_ = false;
  } else if (!due_seen_) {
    due_seen_ = true;
    due_since_ = c_.blocks;
  }
}

void Runtime::enter(int vector, std::uint32_t return_pc) {
  unpack_ccr();
  GuestState g = materialize_state(area_, sys_, return_pc);
  if (vector == kVectorDataAbort) g.sysreg(SysReg::Far) = last_helper_.fault.gva;
  enter_exception(g, vector, return_pc, m_.handlers);
  load_state(g, area_, sys_);
}

bool Runtime::deliver_irq(std::uint32_t return_pc) {
  if (!irq_due()) return false;
  int vector = *m_.irq.pending(c_.guest_num);
  // Became due inside the block that just exited.
  if (!due_seen_) due_since_ = c_.blocks - 1;
  enter(vector, return_pc);
  m_.irq.service();
  ++c_.interrupts;
  c_.max_irq_latency = std::max(c_.max_irq_latency, c_.blocks - due_since_);
  due_seen_ = false;
  return true;
}

bool Runtime::call_helper(HelperId id, std::uint16_t guest, int& cost) {
  const GuestInstr& g = current_->block.tb[guest];
  if (id == HelperId::Memory) {
    last_helper_ = helper_memory(g, area_, sys_, MemoryEnv{m_.mem, &tlb_});
  } else {
    last_helper_ = helper_system(g, area_, sys_, &tlb_);
    if (last_helper_.tlb_flushed) flush_requested_ = true;
    if (last_helper_.status == HelperResult::Status::Ok) update_pending(block_base_ + guest + 1u);
  }
  cost = last_helper_.cost;
  return last_helper_.status == HelperResult::Status::Ok;
}

DbtResult Runtime::run() {
  DbtResult res;
  std::uint32_t pc = m_.state.pc;
  bool host_live = false;  // resident registers hold the guest state (chained entry)
  update_pending(0);
  auto finish = [&](RunStatus st) {
    res.status = st;
    return true;
  };
  try {
    for (;;) {
      // Fuel bounds retired instructions; a halt at the limit still halts.
      if (c_.guest_num >= cfg_.fuel) {
        const GuestInstr* g = program_.find(pc);
        if (!(g && g->op == Mnemonic::Halt && !irq_due())) {
          if (host_live) emergency_save();
          finish(RunStatus::FuelExhausted);
          break;
        }
      }
      Tb* tb = lookup_or_translate(pc);
      if (!tb) {
        if (host_live) emergency_save();
        finish(RunStatus::UndefinedInstruction);
        break;
      }
      if (tb->block.pipeline == Pipeline::Rules && !host_live) restore_from_area();
      current_ = tb;
      block_base_ = c_.guest_num;
      ++c_.blocks;
      std::uint64_t checks_before = ctx_.counters.by_tag[static_cast<std::size_t>(HostTag::Check)];
      std::uint16_t exit = vm_execute(tb->code.code, ctx_, *this);
      c_.checks += (ctx_.counters.by_tag[static_cast<std::size_t>(HostTag::Check)] - checks_before) / 3;
      const ExitDesc d = tb->code.exits.at(exit);
      if (cfg_.on_exit) cfg_.on_exit(tb->block.guest_pc, d, area_);
      c_.guest_num += d.retired;
      c_.rule_covered += d.rule_covered;
      c_.memory += d.memory;
      c_.system += d.system;
      host_live = false;
      bool stop = false;
      switch (d.kind) {
        case ExitKind::Direct: {
          pc = d.target;
          auto link = tb->links.find(exit);
          if (link != tb->links.end()) {
            ++c_.chained;
            host_live = true;
            break;
          }
          ++c_.context_switches;
          if (!cfg_.chaining || !d.chainable) break;
          // Chain once the target exists; translating it here is the miss
          // the loop would take anyway.
          if (Tb* to = lookup_or_translate(pc)) chain(*tb, exit, *to);
          break;
        }
        case ExitKind::Indirect:
          ++c_.context_switches;
          pc = area_.gpr(d.reg);
          break;
        case ExitKind::Halt:
          ++c_.context_switches;
          pc = d.target;
          if (!deliver_irq(pc)) stop = finish(RunStatus::Halted);
          else pc = area_.get(Slot::Pc);
          break;
        case ExitKind::Svc: {
          ++c_.context_switches;
          const GuestInstr* g = program_.find(d.target);
          if (sys_.mode == Mode::Privileged) {
            unpack_ccr();
            GuestState s = materialize_state(area_, sys_, d.target);
            exception_return(s);
            load_state(s, area_, sys_);
            pc = s.pc;
          } else {
            enter(g->imm, d.target + 4);
            pc = area_.get(Slot::Pc);
          }
          break;
        }
        case ExitKind::Fault: {
          ++c_.context_switches;
          ++c_.exceptions;
          int vector = last_helper_.status == HelperResult::Status::PrivilegeFault ? kVectorUndefined
                                                                                   : kVectorDataAbort;
          enter(vector, d.target);
          pc = area_.get(Slot::Pc);
          break;
        }
        case ExitKind::Interrupt:
          ++c_.context_switches;
          pc = d.target;
          if (deliver_irq(pc)) pc = area_.get(Slot::Pc);
          break;
      }
      if (flush_requested_) {
        flush_chains();
        flush_requested_ = false;
      }
      if (stop) break;
      update_pending(c_.guest_num);
    }
  } catch (const UnconfiguredVector& e) {
    res.status = RunStatus::UnconfiguredVector;
    res.error = e.what();
  }
  c_.vm = ctx_.counters;
  c_.tlb_hits = tlb_.hits;
  c_.tlb_misses = tlb_.misses;
  res.state = materialize_state(area_, sys_, pc);
  res.mem = m_.mem;
  res.counters = c_;
  return res;
}

DbtResult run_dbt(const GuestProgram& program, const Machine& machine, const RuleSet& rules,
                  const RuntimeConfig& cfg) {
  Runtime rt(program, machine, rules, cfg);
  return rt.run();
}

}  // namespace sdbt
