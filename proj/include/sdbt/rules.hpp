// Learned-style translation rules: parameterized guest patterns paired with
// host templates, loaded from a text file.
//
//   rule <name> [constrained]
//   guest: <guest pattern line>      (one or more)
//   host:  <host template line>      (one or more)
//
// Placeholders: %Rd %Rn %Rm (registers), %imm, %aluop (three-operand ALU
// mnemonic), %cond (any non-AL condition). `@end` names the end of the
// template as a jump target.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdbt/guest_isa.hpp"
#include "sdbt/host_isa.hpp"

namespace sdbt {

class RuleError : public std::runtime_error {
 public:
  RuleError(int line, const std::string& msg)
      : std::runtime_error("rules:" + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct PatternOperand {
  bool is_reg = true;
  std::string placeholder;  // empty for a concrete value
  std::int32_t value = 0;
};

struct GuestPattern {
  std::optional<Mnemonic> op;  // nullopt: %aluop
  bool any_cond = false;       // %cond
  bool sets_flags = false;
  std::vector<PatternOperand> operands;
};

struct TemplateOperand {
  enum class Kind : std::uint8_t { Reg, Imm, Cond, Flag, End };
  Kind kind = Kind::Reg;
  std::string placeholder;  // %Rd, %imm, %cond
  std::int32_t value = 0;   // concrete register, immediate, or flag bit
  Condition cond = Condition::AL;
};

struct HostTemplate {
  HostOp op = HostOp::Mov;
  bool op_from_aluop = false;
  bool set_flags = false;
  std::vector<TemplateOperand> operands;
};

struct TranslationRule {
  std::string name;
  bool constrained = false;
  std::vector<GuestPattern> guest;
  std::vector<HostTemplate> host;
  int line = 0;
};

struct RuleSet {
  std::vector<TranslationRule> rules;
};

RuleSet parse_rules(const std::string& text);
RuleSet load_rules(const std::string& path);

struct Binding {
  const TranslationRule* rule = nullptr;
  int span = 0;  // guest instructions covered
  std::map<std::string, std::int64_t> values;
  Mnemonic aluop = Mnemonic::Add;
  Condition cond = Condition::AL;
};

// Longest match at the start of `instrs`; ties go to file order.
std::optional<Binding> match_rule(std::span<const GuestInstr> instrs, const RuleSet& rules);

// Marks a jump to the end of the instantiated template.
inline constexpr std::int32_t kTemplateEnd = -2;

std::vector<HostInstr> instantiate(const Binding& b);

HostOp host_op_for(Mnemonic alu);

}  // namespace sdbt
