#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparce {

// ---------------------------------------------------------------------------
// Toy RISC-style ISA: scalar integer (64-bit), scalar float (f32) and 4-lane
// SIMD float register files, plus the SASALD table-load extension.
// PCs are instruction indices, not byte addresses.
// ---------------------------------------------------------------------------

enum class Opcode {
  LD, ST, VLD, VST, PRFM,
  FMUL, FADD, FMLA, VFMLA,
  ADD, SUB, SUBS, MOV,
  B, BNE, BEQ,
  SASALD, HALT,
};

const char* opcode_name(Opcode op);

enum class RegFile { Int = 0, Fp = 1, Vec = 2 };

constexpr int kRegsPerFile = 32;
constexpr int kVecLanes = 4;

struct RegRef {
  RegFile file{RegFile::Int};
  int index{0};

  bool operator==(const RegRef&) const = default;
  bool operator<(const RegRef& o) const {
    return key() < o.key();
  }
  // Dense key 0..95, used for scoreboards and liveness bitsets.
  int key() const { return static_cast<int>(file) * kRegsPerFile + index; }
  static RegRef from_key(int k) {
    return RegRef{static_cast<RegFile>(k / kRegsPerFile), k % kRegsPerFile};
  }
};

std::string reg_name(const RegRef& r);

struct Operand {
  enum class Kind { Reg, Lane, Imm, FImm, Mem, Symbol };
  Kind kind{Kind::Reg};

  RegRef reg{};          // Reg, Lane
  int lane{0};           // Lane
  int64_t imm{0};        // Imm
  float fimm{0.0f};      // FImm

  // Mem: [base], [base, #offset], [base], #postAmount
  RegRef base{};
  int64_t offset{0};
  bool postInc{false};
  int64_t postAmount{0};

  std::string symbol;    // Symbol (resolved to an address immediate at parse)

  static Operand make_reg(RegRef r) { Operand o; o.kind = Kind::Reg; o.reg = r; return o; }
  static Operand make_lane(RegRef r, int lane) {
    Operand o; o.kind = Kind::Lane; o.reg = r; o.lane = lane; return o;
  }
  static Operand make_imm(int64_t v) { Operand o; o.kind = Kind::Imm; o.imm = v; return o; }
  static Operand make_fimm(float v) { Operand o; o.kind = Kind::FImm; o.fimm = v; return o; }
  static Operand make_mem(RegRef base, int64_t offset = 0) {
    Operand o; o.kind = Kind::Mem; o.base = base; o.offset = offset; return o;
  }
  static Operand make_mem_post(RegRef base, int64_t amount) {
    Operand o; o.kind = Kind::Mem; o.base = base; o.postInc = true; o.postAmount = amount;
    return o;
  }
};

// An instruction carries at most one destination register and the explicit
// source operands in listing order. FMLA/VFMLA additionally read their
// destination as an implicit accumulator; that read is not an explicit
// operand and does not count against the 2-source-operand limit.
struct Instruction {
  Opcode op{Opcode::HALT};
  std::optional<RegRef> dst;
  std::vector<Operand> srcs;
  int branchTarget{-1};      // resolved instruction index for B/BNE/BEQ
  std::string labelRef;      // original target label, kept for printing/remap
  int line{0};               // source line, 0 if synthesized

  bool is_load() const { return op == Opcode::LD || op == Opcode::VLD; }
  bool is_store() const { return op == Opcode::ST || op == Opcode::VST; }
  bool is_branch() const { return op == Opcode::B || op == Opcode::BNE || op == Opcode::BEQ; }
  bool is_mem() const {
    return is_load() || is_store() || op == Opcode::PRFM;
  }
  const Operand* mem_operand() const;
  bool has_post_increment() const {
    const Operand* m = mem_operand();
    return m && m->postInc;
  }
  bool sets_flag() const { return op == Opcode::SUBS; }
  bool reads_flag() const { return op == Opcode::BNE || op == Opcode::BEQ; }
  bool has_implicit_acc() const {
    return op == Opcode::FMLA || op == Opcode::VFMLA;
  }

  // All registers read (explicit sources, memory bases, implicit accumulator).
  std::vector<RegRef> reads() const;
  // All registers written (dst plus post-increment base).
  std::vector<RegRef> writes() const;
};

// --- SASA entry types. The table payload format is architectural (SASALD
// loads it from memory), so the condition types live next to the ISA.

enum class Combiner { Single = 0, Or = 1, And = 2 };

struct CondTerm {
  RegFile file{RegFile::Fp};
  int regIndex{0};
  uint8_t laneMask{0x1};   // bit k <-> word k; scalars use 0b0001

  bool operator==(const CondTerm&) const = default;
  bool operator<(const CondTerm& o) const {
    if (file != o.file) return file < o.file;
    if (regIndex != o.regIndex) return regIndex < o.regIndex;
    return laneMask < o.laneMask;
  }
  RegRef reg() const { return RegRef{file, regIndex}; }
};

struct SkipCondition {
  Combiner comb{Combiner::Single};
  CondTerm term1{};
  std::optional<CondTerm> term2;

  bool operator==(const SkipCondition&) const = default;
  std::vector<CondTerm> terms() const {
    std::vector<CondTerm> t{term1};
    if (term2) t.push_back(*term2);
    return t;
  }
  static SkipCondition single(CondTerm t) { return SkipCondition{Combiner::Single, t, {}}; }
};

std::string cond_to_string(const SkipCondition& c);
SkipCondition cond_from_string(const std::string& s);  // throws std::runtime_error

struct SasaEntry {
  int precedingPC{0};
  SkipCondition condition{};
  int instsToSkip{1};

  bool operator==(const SasaEntry&) const = default;
};

// Bit-exact binary layout: three little-endian 64-bit words per entry.
//   word0 = precedingPC
//   word1 = condition: bits 0-1 combiner, 2-3 term1.regFile, 4-9 term1.regIndex,
//           10-13 term1.laneMask, 16-17 term2.regFile, 18-23 term2.regIndex,
//           24-27 term2.laneMask (term2 bits zero when combiner is Single)
//   word2 = instsToSkip
constexpr size_t kSasaEntryBytes = 24;
std::vector<uint8_t> encode_sasa_entries(const std::vector<SasaEntry>& entries);
std::vector<SasaEntry> decode_sasa_entries(const uint8_t* bytes, size_t count);  // throws on malformed

// --- Program -----------------------------------------------------------------

struct DataBlock {
  uint64_t addr{0};
  std::vector<uint8_t> bytes;
};

struct SasaBlock {
  std::string name;
  std::vector<SasaEntry> entries;
  uint64_t addr{0};   // assigned by the assembler, 64-byte aligned
};

struct Program {
  std::vector<Instruction> instructions;   // PC = index
  std::map<std::string, int> labels;       // name -> instruction index
  std::vector<DataBlock> data;
  std::vector<SasaBlock> sasaBlocks;

  std::optional<uint64_t> symbol_address(const std::string& name) const;
  // Data blocks plus serialized SASA blocks, for seeding memory.
  std::vector<DataBlock> all_data_blocks() const;
};

struct AsmError : std::runtime_error {
  int line;
  int col;
  AsmError(int line_, int col_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ", col " +
                           std::to_string(col_) + ": " + msg),
        line(line_), col(col_) {}
};

Program parse_program(const std::string& text);  // throws AsmError
std::string print_program(const Program& p);

struct Diagnostic {
  int pc;           // -1 when not tied to an instruction
  std::string message;
};

// Empty iff the program satisfies all instruction/program invariants.
std::vector<Diagnostic> validate(const Program& p);

}  // namespace sparce
