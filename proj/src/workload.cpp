#include "sdbt/workload.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sdbt {

namespace {

std::uint32_t u32(const YAML::Node& n, const char* what) {
  try {
    return static_cast<std::uint32_t>(std::stoul(n.as<std::string>(), nullptr, 0));
  } catch (const std::exception&) {
    throw WorkloadError(std::string("bad number for ") + what);
  }
}

std::uint64_t u64(const YAML::Node& n, const char* what) {
  try {
    return std::stoull(n.as<std::string>(), nullptr, 0);
  } catch (const std::exception&) {
    throw WorkloadError(std::string("bad number for ") + what);
  }
}

int reg_index(const std::string& name) {
  if (name.size() < 2 || name[0] != 'r') throw WorkloadError("bad register name '" + name + "'");
  int r = std::stoi(name.substr(1));
  if (r < 0 || r >= kNumGuestRegs) throw WorkloadError("bad register name '" + name + "'");
  return r;
}

RunStatus parse_status(const std::string& s) {
  for (RunStatus st : {RunStatus::Halted, RunStatus::FuelExhausted, RunStatus::UndefinedInstruction,
                       RunStatus::UnconfiguredVector})
    if (run_status_name(st) == s) return st;
  throw WorkloadError("unknown status '" + s + "'");
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

Workload parse_workload(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node y;
  try {
    y = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw WorkloadError(std::string("workload yaml: ") + e.what());
  }
  Workload w;
  w.name = y["name"].as<std::string>("unnamed");
  if (!y["program"]) throw WorkloadError("workload has no program");
  w.program_path = base_dir / y["program"].as<std::string>();
  std::ifstream in(w.program_path);
  if (!in) throw WorkloadError("cannot read program " + w.program_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  w.program = parse_guest_asm(ss.str());
  if (y["fuel"]) w.fuel = u64(y["fuel"], "fuel");
  if (y["mode"]) {
    std::string m = y["mode"].as<std::string>();
    if (m == "user") w.mode = Mode::User;
    else if (m == "privileged") w.mode = Mode::Privileged;
    else throw WorkloadError("unknown mode '" + m + "'");
  }
  if (auto mem = y["memory"]) {
    if (mem["identity_end"]) w.identity_end = u32(mem["identity_end"], "identity_end");
    if (mem["table_region"]) w.table_region = u32(mem["table_region"], "table_region");
    for (const auto& m : mem["mappings"]) {
      w.mappings.push_back({u32(m["gva"], "gva"), u32(m["frame"], "frame"), m["writable"].as<bool>(true)});
    }
  }
  for (const auto& kv : y["regs"]) w.regs[reg_index(kv.first.as<std::string>())] = u32(kv.second, "register");
  for (const auto& e : y["interrupts"]) {
    w.interrupts.push_back({u64(e["count"], "count"), static_cast<int>(u32(e["vector"], "vector"))});
  }
  for (const auto& kv : y["handlers"]) {
    w.handlers[static_cast<int>(u32(kv.first, "vector"))] = u32(kv.second, "handler");
  }
  if (auto e = y["expected"]) {
    ExpectedState x;
    x.status = parse_status(e["status"].as<std::string>());
    x.pc = u32(e["pc"], "pc");
    x.nzcv = static_cast<std::uint8_t>(u32(e["nzcv"], "nzcv"));
    x.retired = u64(e["retired"], "retired");
    x.interrupts = u64(e["interrupts"], "interrupts");
    x.memory_hash = u64(e["memory_hash"], "memory_hash");
    auto r = e["r"];
    if (!r.IsSequence() || r.size() != static_cast<std::size_t>(kNumGuestRegs))
      throw WorkloadError("expected.r needs 15 values");
    for (int i = 0; i < kNumGuestRegs; ++i) x.r[static_cast<std::size_t>(i)] = u32(r[static_cast<std::size_t>(i)], "r");
    w.expected = x;
  }
  return w;
}

Workload load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot read workload " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_workload(ss.str(), path.parent_path());
}

Machine build_machine(const Workload& w) {
  Machine m;
  PageTableBuilder pt(m.mem, w.table_region);
  if (w.mappings.empty()) {
    pt.identity(0, w.identity_end);
  } else {
    for (const auto& p : w.mappings) pt.map(p.gva, p.frame, p.writable);
  }
  m.state.sysreg(SysReg::Ttbr) = pt.root();
  for (auto [addr, word] : w.program.data) {
    Translation t = page_walk(addr, Access::Read, pt.root(), m.mem);
    if (!t.ok()) throw WorkloadError("data word at " + hex(addr) + " is not mapped");
    m.mem.write32(*t.gpa, word);
  }
  m.state.pc = w.program.entry;
  m.state.mode = w.mode;
  for (auto [r, v] : w.regs) m.state.r[static_cast<std::size_t>(r)] = v;
  m.irq = InterruptController(w.interrupts);
  m.handlers = w.handlers;
  return m;
}

Machine default_machine(const GuestProgram& program) {
  Workload w;
  w.program = program;
  return build_machine(w);
}

std::uint64_t memory_hash(const PhysMemory& mem) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  };
  for (auto [addr, word] : mem.nonzero_words()) {
    mix(addr);
    mix(word);
  }
  return h;
}

ExpectedState expected_state(RunStatus status, const GuestState& s, const PhysMemory& mem, std::uint64_t retired,
                             std::uint64_t interrupts) {
  ExpectedState e;
  e.status = status;
  e.r = s.r;
  e.pc = s.pc;
  e.nzcv = s.nzcv;
  e.retired = retired;
  e.interrupts = interrupts;
  e.memory_hash = memory_hash(mem);
  return e;
}

ExpectedState expected_from(const InterpResult& r) {
  return expected_state(r.status, r.state, r.mem, r.retired, r.interrupts);
}

std::string expected_diff(const ExpectedState& want, const ExpectedState& got) {
  if (want.status != got.status) return "status";
  for (int i = 0; i < kNumGuestRegs; ++i)
    if (want.r[i] != got.r[i]) return "r" + std::to_string(i);
  if (want.pc != got.pc) return "pc";
  if (want.nzcv != got.nzcv) return "nzcv";
  if (want.retired != got.retired) return "retired";
  if (want.interrupts != got.interrupts) return "interrupts";
  if (want.memory_hash != got.memory_hash) return "memory_hash";
  return {};
}

std::string expected_yaml(const ExpectedState& e) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "expected" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "status" << YAML::Value << std::string(run_status_name(e.status));
  out << YAML::Key << "pc" << YAML::Value << hex(e.pc);
  out << YAML::Key << "nzcv" << YAML::Value << hex(e.nzcv);
  out << YAML::Key << "retired" << YAML::Value << e.retired;
  out << YAML::Key << "interrupts" << YAML::Value << e.interrupts;
  out << YAML::Key << "memory_hash" << YAML::Value << hex(e.memory_hash);
  out << YAML::Key << "r" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto v : e.r) out << hex(v);
  out << YAML::EndSeq << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string quiescent_diff(const GuestState& a, const PhysMemory& ma, const GuestState& b, const PhysMemory& mb) {
  std::ostringstream os;
  for (int i = 0; i < kNumGuestRegs; ++i) {
    auto x = a.r[static_cast<std::size_t>(i)], y = b.r[static_cast<std::size_t>(i)];
    if (x != y) os << "r" << i << ": " << hex(x) << " vs " << hex(y) << "; ";
  }
  if (a.pc != b.pc) os << "pc: " << hex(a.pc) << " vs " << hex(b.pc) << "; ";
  if (a.nzcv != b.nzcv) os << "nzcv: " << hex(a.nzcv) << " vs " << hex(b.nzcv) << "; ";
  if (a.mode != b.mode) os << "mode differs; ";
  if (a.irq_masked != b.irq_masked) os << "irq mask differs; ";
  for (SysReg s : {SysReg::Fpscr, SysReg::Fpexc, SysReg::Ttbr}) {
    if (a.sysreg(s) != b.sysreg(s)) os << sysreg_name(s) << " differs; ";
  }
  if (!ma.same_contents(mb)) os << "memory differs; ";
  return os.str();
}

}  // namespace sdbt
