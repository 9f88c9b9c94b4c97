// Host-side RISC instruction set and the virtual machine that executes it.
//
// h0..h11 hold guest r0..r11 while translated code runs; h12..h14 stage the
// guest registers that always live in the state area; h15 is scratch.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sdbt/guest_isa.hpp"
#include "sdbt/machine.hpp"

namespace sdbt {

inline constexpr int kNumHostRegs = 16;
inline constexpr int kNumResidentRegs = 12;  // guest r0..r11 live in h0..h11
inline constexpr std::uint8_t kScratch = 15;
inline constexpr RegMask kResidentMask = 0x0FFF;

enum class HostOp : std::uint8_t {
  Mov, Add, Sub, And, Or, Xor, Shl, Shr,
  Cmp,
  Jcc, Jmp,
  Ld, St,
  Flags2Reg, Reg2Flags, FlagExt,
  Call,
  Exit,
};

enum class HostTag : std::uint8_t { Translated, Sync, Helper, Check, Chain };
inline constexpr int kNumHostTags = 5;
std::string_view host_tag_name(HostTag t);

enum class HelperId : std::uint8_t { Memory, System };

struct HostInstr {
  HostOp op = HostOp::Mov;
  bool set_flags = false;   // `.f` variant
  std::uint8_t dst = 0;
  std::uint8_t a = 0;
  std::uint8_t b = 0;
  bool b_imm = false;       // second operand (or stored value) is `imm`
  std::int32_t imm = 0;
  Slot slot = Slot::R0;     // ld / st
  Condition cond = Condition::AL;  // jcc; flagext when `flag` is zero
  FlagSet flag = 0;         // flagext of one named flag
  std::int32_t target = -1; // jump target, or the fault stub of a call
  std::uint16_t guest = 0;  // call: guest instruction index within the block
  HelperId helper = HelperId::Memory;
  std::uint16_t exit = 0;   // exit: index into the block's exit table
  HostTag tag = HostTag::Translated;
  bool sync_start = false;  // first instruction of a lowered sync operation

  friend bool operator==(const HostInstr&, const HostInstr&) = default;
};

// Constructors for readable emission.
namespace h {
HostInstr alu(HostOp op, int dst, int a, int b, bool f = false);
HostInstr alui(HostOp op, int dst, int a, std::int32_t imm, bool f = false);
HostInstr mov(int dst, int src, bool f = false);
HostInstr movi(int dst, std::int32_t imm, bool f = false);
HostInstr cmp(int a, int b);
HostInstr cmpi(int a, std::int32_t imm);
HostInstr jcc(Condition c, std::int32_t target);
HostInstr jmp(std::int32_t target);
HostInstr ld(int dst, Slot s);
HostInstr st(Slot s, int src);
HostInstr sti(Slot s, std::int32_t imm);
HostInstr flags2reg(int dst);
HostInstr reg2flags(int src);
HostInstr flagext(int dst, FlagSet flag);
HostInstr condext(int dst, Condition c);
HostInstr call(HelperId id, std::uint16_t guest);
HostInstr exit(std::uint16_t index);
}  // namespace h

HostInstr tagged(HostInstr i, HostTag t);
std::string print_host(const HostInstr& i);
std::string print_host(const std::vector<HostInstr>& code);

// Host ALU. Flag behaviour mirrors the guest for the `.f` variants.
struct HostAluOut {
  std::uint32_t value = 0;
  std::uint8_t flags = 0;
};
HostAluOut host_alu(HostOp op, std::uint32_t a, std::uint32_t b, std::uint8_t flags);

// Callback into the runtime for hcall. Returns false when the helper raised a
// guest exception; execution then continues at the call's fault stub.
class HelperHost {
 public:
  virtual ~HelperHost() = default;
  virtual bool call_helper(HelperId id, std::uint16_t guest, int& cost) = 0;
};

struct VmCounters {
  std::array<std::uint64_t, kNumHostTags> by_tag{};
  std::uint64_t helper_internal = 0;  // charged to the Helper tag as well
  std::uint64_t sync_ops = 0;
  std::uint64_t stale_ccr_reads = 0;  // loads of a stale CCR representation

  std::uint64_t total() const;
  void add(const VmCounters& o);
};

struct VmContext {
  std::array<std::uint32_t, kNumHostRegs> h{};
  std::uint8_t flags = 0;
  EmuStateArea* area = nullptr;
  VmCounters counters;
};

class HostFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs code from index 0 until an exit; returns the exit index.
std::uint16_t vm_execute(const std::vector<HostInstr>& code, VmContext& ctx, HelperHost& helpers);

}  // namespace sdbt
