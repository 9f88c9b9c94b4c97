// Guest instruction set: an ARM-v7 flavoured subset with a textual assembler.
//
// Instructions live in a Harvard-style record store keyed by guest virtual
// address; every instruction occupies 4 address units.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace sdbt {

inline constexpr int kNumGuestRegs = 15;  // r0..r14
inline constexpr int kLinkReg = 14;

enum class Condition : std::uint8_t { EQ, NE, GE, LT, AL };

enum class Mnemonic : std::uint8_t {
  Mov, Mvn, Add, Sub, And, Orr, Eor, Lsl, Lsr,
  Cmp,
  Ldr, Str,
  B, Bl, Bx,
  Vmsr, Vmrs, Setcpsr, Getcpsr, Tlbi, Svc,
  Halt,
};

enum class Category : std::uint8_t { RuleEligible, MemoryAccess, SystemLevel, Branch, Halt };

// VFP-style and banked system registers reachable through vmsr/vmrs.
enum class SysReg : std::uint8_t { Fpscr, Fpexc, Elr, Spsr, Far, Ttbr, Scratch0, Scratch1 };
inline constexpr int kNumSysRegs = 8;

// Flag bits, laid out as in the packed NZCV register.
using FlagSet = std::uint8_t;
inline constexpr FlagSet kFlagN = 8, kFlagZ = 4, kFlagC = 2, kFlagV = 1;
inline constexpr FlagSet kAllFlags = 0xF;

// Bit mask over r0..r14.
using RegMask = std::uint16_t;

struct GuestInstr {
  std::uint32_t addr = 0;
  Mnemonic op = Mnemonic::Halt;
  Condition cond = Condition::AL;
  bool sets_flags = false;
  std::uint8_t rd = 0;
  std::uint8_t rn = 0;
  std::uint8_t rm = 0;
  bool has_imm = false;     // second source is `imm` instead of `rm`
  std::int32_t imm = 0;     // ALU immediate, memory offset, svc number
  std::uint32_t target = 0; // b / bl destination
  SysReg sysreg = SysReg::Fpscr;

  friend bool operator==(const GuestInstr&, const GuestInstr&) = default;
};

struct GuestProgram {
  std::uint32_t entry = 0;
  std::map<std::uint32_t, GuestInstr> instrs;
  std::map<std::uint32_t, std::uint32_t> data;  // .word image, address -> word

  const GuestInstr* find(std::uint32_t addr) const {
    auto it = instrs.find(addr);
    return it == instrs.end() ? nullptr : &it->second;
  }
  friend bool operator==(const GuestProgram&, const GuestProgram&) = default;
};

class AsmError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownMnemonic, UnresolvedLabel };
  AsmError(Kind kind, int line, const std::string& msg);
  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  Kind kind_;
  int line_;
};

GuestProgram parse_guest_asm(std::string_view text);
std::string print_instr(const GuestInstr& instr);
std::string print_program(const GuestProgram& program);

Category classify(const GuestInstr& instr);

struct FlagDefUse {
  FlagSet defines = 0;
  FlagSet uses = 0;
};
FlagDefUse flag_def_use(const GuestInstr& instr);

// Flags a condition reads; AL reads nothing.
FlagSet condition_uses(Condition cond);
bool condition_holds(Condition cond, std::uint8_t nzcv);
Condition invert(Condition cond);

struct RegDefUse {
  RegMask defs = 0;   // registers possibly written
  RegMask kills = 0;  // registers written on every execution
  RegMask uses = 0;
};
RegDefUse reg_def_use(const GuestInstr& instr);

// True for instructions that end a translation block.
bool ends_block(const GuestInstr& instr);
bool is_privileged(Mnemonic op);
bool is_alu(Mnemonic op);

std::string_view mnemonic_name(Mnemonic op);
std::string_view condition_name(Condition cond);
std::string_view sysreg_name(SysReg reg);
std::optional<SysReg> parse_sysreg(std::string_view name);

}  // namespace sdbt
