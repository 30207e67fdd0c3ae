#include "sparce/isa.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <set>
#include <sstream>

namespace sparce {

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::LD: return "LD";
    case Opcode::ST: return "ST";
    case Opcode::VLD: return "VLD";
    case Opcode::VST: return "VST";
    case Opcode::PRFM: return "PRFM";
    case Opcode::FMUL: return "FMUL";
    case Opcode::FADD: return "FADD";
    case Opcode::FMLA: return "FMLA";
    case Opcode::VFMLA: return "VFMLA";
    case Opcode::ADD: return "ADD";
    case Opcode::SUB: return "SUB";
    case Opcode::SUBS: return "SUBS";
    case Opcode::MOV: return "MOV";
    case Opcode::B: return "B";
    case Opcode::BNE: return "BNE";
    case Opcode::BEQ: return "BEQ";
    case Opcode::SASALD: return "SASALD";
    case Opcode::HALT: return "HALT";
  }
  return "?";
}

std::string reg_name(const RegRef& r) {
  static const char prefix[3] = {'r', 'f', 'v'};
  return std::string(1, prefix[static_cast<int>(r.file)]) + std::to_string(r.index);
}

const Operand* Instruction::mem_operand() const {
  for (const auto& s : srcs)
    if (s.kind == Operand::Kind::Mem) return &s;
  return nullptr;
}

std::vector<RegRef> Instruction::reads() const {
  std::vector<RegRef> out;
  for (const auto& s : srcs) {
    switch (s.kind) {
      case Operand::Kind::Reg:
      case Operand::Kind::Lane:
        out.push_back(s.reg);
        break;
      case Operand::Kind::Mem:
        out.push_back(s.base);
        break;
      default:
        break;
    }
  }
  if (has_implicit_acc() && dst) out.push_back(*dst);
  return out;
}

std::vector<RegRef> Instruction::writes() const {
  std::vector<RegRef> out;
  if (dst) out.push_back(*dst);
  const Operand* m = mem_operand();
  if (m && m->postInc) out.push_back(m->base);
  return out;
}

// --- condition strings -------------------------------------------------------

static std::string term_to_string(const CondTerm& t) {
  RegRef r{t.file, t.regIndex};
  if (t.file == RegFile::Vec) {
    if (t.laneMask == 0xF) return reg_name(r);
    // single lane prints as .s[k], other masks as .m[hex]
    int lanes = 0, lastLane = 0;
    for (int k = 0; k < kVecLanes; ++k)
      if (t.laneMask & (1 << k)) { ++lanes; lastLane = k; }
    if (lanes == 1) return reg_name(r) + ".s[" + std::to_string(lastLane) + "]";
    char buf[8];
    std::snprintf(buf, sizeof buf, "%x", t.laneMask);
    return reg_name(r) + ".m[" + buf + "]";
  }
  return reg_name(r);
}

std::string cond_to_string(const SkipCondition& c) {
  std::string s = term_to_string(c.term1);
  if (c.comb == Combiner::Or) s += "|" + term_to_string(*c.term2);
  else if (c.comb == Combiner::And) s += "&" + term_to_string(*c.term2);
  return s;
}

static CondTerm term_from_string(const std::string& s) {
  if (s.empty()) throw std::runtime_error("empty condition term");
  RegFile file;
  switch (std::tolower(s[0])) {
    case 'r': file = RegFile::Int; break;
    case 'f': file = RegFile::Fp; break;
    case 'v': file = RegFile::Vec; break;
    default: throw std::runtime_error("bad register in condition term: " + s);
  }
  size_t i = 1;
  std::string digits;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) digits += s[i++];
  if (digits.empty()) throw std::runtime_error("bad register in condition term: " + s);
  int index = std::stoi(digits);
  if (index < 0 || index >= kRegsPerFile)
    throw std::runtime_error("register index out of range: " + s);
  uint8_t mask = (file == RegFile::Vec) ? 0xF : 0x1;
  if (i < s.size()) {
    if (s.compare(i, 3, ".s[") == 0) {
      size_t close = s.find(']', i + 3);
      if (close == std::string::npos) throw std::runtime_error("bad lane selector: " + s);
      int lane = std::stoi(s.substr(i + 3, close - i - 3));
      if (lane < 0 || lane >= kVecLanes) throw std::runtime_error("lane out of range: " + s);
      mask = static_cast<uint8_t>(1 << lane);
      i = close + 1;
    } else if (s.compare(i, 3, ".m[") == 0) {
      size_t close = s.find(']', i + 3);
      if (close == std::string::npos) throw std::runtime_error("bad mask selector: " + s);
      mask = static_cast<uint8_t>(std::stoul(s.substr(i + 3, close - i - 3), nullptr, 16));
      i = close + 1;
    }
    if (i != s.size()) throw std::runtime_error("trailing characters in term: " + s);
  }
  if (mask == 0 || mask > 0xF) throw std::runtime_error("lane mask must be nonzero: " + s);
  return CondTerm{file, index, mask};
}

SkipCondition cond_from_string(const std::string& s) {
  size_t bar = s.find('|');
  size_t amp = s.find('&');
  if (bar != std::string::npos) {
    return SkipCondition{Combiner::Or, term_from_string(s.substr(0, bar)),
                         term_from_string(s.substr(bar + 1))};
  }
  if (amp != std::string::npos) {
    return SkipCondition{Combiner::And, term_from_string(s.substr(0, amp)),
                         term_from_string(s.substr(amp + 1))};
  }
  return SkipCondition::single(term_from_string(s));
}

// --- SASA binary layout --------------------------------------------------------

static void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

static uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

static uint64_t encode_condition(const SkipCondition& c) {
  uint64_t w = static_cast<uint64_t>(c.comb) & 0x3;
  w |= (static_cast<uint64_t>(c.term1.file) & 0x3) << 2;
  w |= (static_cast<uint64_t>(c.term1.regIndex) & 0x3F) << 4;
  w |= (static_cast<uint64_t>(c.term1.laneMask) & 0xF) << 10;
  if (c.term2) {
    w |= (static_cast<uint64_t>(c.term2->file) & 0x3) << 16;
    w |= (static_cast<uint64_t>(c.term2->regIndex) & 0x3F) << 18;
    w |= (static_cast<uint64_t>(c.term2->laneMask) & 0xF) << 24;
  }
  return w;
}

static SkipCondition decode_condition(uint64_t w) {
  uint64_t combBits = w & 0x3;
  if (combBits > 2) throw std::runtime_error("malformed SASA condition: bad combiner");
  SkipCondition c;
  c.comb = static_cast<Combiner>(combBits);
  auto decode_term = [&](int shift) {
    uint64_t fileBits = (w >> (shift + 0)) & 0x3;
    if (fileBits > 2) throw std::runtime_error("malformed SASA condition: bad register file");
    CondTerm t;
    t.file = static_cast<RegFile>(fileBits);
    t.regIndex = static_cast<int>((w >> (shift + 2)) & 0x3F);
    if (t.regIndex >= kRegsPerFile)
      throw std::runtime_error("malformed SASA condition: register index out of range");
    t.laneMask = static_cast<uint8_t>((w >> (shift + 8)) & 0xF);
    if (t.laneMask == 0)
      throw std::runtime_error("malformed SASA condition: zero lane mask");
    return t;
  };
  c.term1 = decode_term(2);
  if (c.comb != Combiner::Single) c.term2 = decode_term(16);
  return c;
}

std::vector<uint8_t> encode_sasa_entries(const std::vector<SasaEntry>& entries) {
  std::vector<uint8_t> out;
  out.reserve(entries.size() * kSasaEntryBytes);
  for (const auto& e : entries) {
    put_u64(out, static_cast<uint64_t>(e.precedingPC));
    put_u64(out, encode_condition(e.condition));
    put_u64(out, static_cast<uint64_t>(e.instsToSkip));
  }
  return out;
}

std::vector<SasaEntry> decode_sasa_entries(const uint8_t* bytes, size_t count) {
  std::vector<SasaEntry> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const uint8_t* p = bytes + i * kSasaEntryBytes;
    SasaEntry e;
    e.precedingPC = static_cast<int>(get_u64(p));
    e.condition = decode_condition(get_u64(p + 8));
    e.instsToSkip = static_cast<int>(get_u64(p + 16));
    if (e.instsToSkip <= 0)
      throw std::runtime_error("malformed SASA entry: instsToSkip must be positive");
    out.push_back(e);
  }
  return out;
}

// --- Program helpers -----------------------------------------------------------

std::optional<uint64_t> Program::symbol_address(const std::string& name) const {
  for (const auto& b : sasaBlocks)
    if (b.name == name) return b.addr;
  return std::nullopt;
}

std::vector<DataBlock> Program::all_data_blocks() const {
  std::vector<DataBlock> out = data;
  for (const auto& b : sasaBlocks)
    out.push_back(DataBlock{b.addr, encode_sasa_entries(b.entries)});
  return out;
}

// --- parser --------------------------------------------------------------------

namespace {

constexpr uint64_t kSasaBlockOrigin = 0xE00000;

struct Cursor {
  const std::string& s;
  size_t pos{0};
  int line;

  explicit Cursor(const std::string& str, int line_) : s(str), line(line_) {}
  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= s.size();
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }
  int col() const { return static_cast<int>(pos) + 1; }
  [[noreturn]] void fail(const std::string& msg) { throw AsmError(line, col(), msg); }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
  bool accept(char c) {
    if (peek() == c) { ++pos; return true; }
    return false;
  }
  std::string word() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' ||
            s[pos] == '.' || s[pos] == '[' || s[pos] == ']'))
      ++pos;
    return s.substr(start, pos - start);
  }
  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected identifier");
    return s.substr(start, pos - start);
  }
};

std::optional<Opcode> opcode_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), ::toupper);
  static const std::map<std::string, Opcode> table = {
      {"LD", Opcode::LD},     {"ST", Opcode::ST},     {"VLD", Opcode::VLD},
      {"VST", Opcode::VST},   {"PRFM", Opcode::PRFM}, {"FMUL", Opcode::FMUL},
      {"FADD", Opcode::FADD}, {"FMLA", Opcode::FMLA}, {"VFMLA", Opcode::VFMLA},
      {"ADD", Opcode::ADD},   {"SUB", Opcode::SUB},   {"SUBS", Opcode::SUBS},
      {"MOV", Opcode::MOV},   {"B", Opcode::B},       {"BNE", Opcode::BNE},
      {"BEQ", Opcode::BEQ},   {"SASALD", Opcode::SASALD}, {"HALT", Opcode::HALT},
  };
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

RegRef parse_reg(Cursor& c) {
  c.skip_ws();
  char p = c.peek();
  RegFile file;
  if (p == 'r' || p == 'R') file = RegFile::Int;
  else if (p == 'f' || p == 'F') file = RegFile::Fp;
  else if (p == 'v' || p == 'V') file = RegFile::Vec;
  else c.fail("expected register");
  ++c.pos;
  std::string digits;
  while (c.pos < c.s.size() && std::isdigit(static_cast<unsigned char>(c.s[c.pos])))
    digits += c.s[c.pos++];
  if (digits.empty()) c.fail("expected register index");
  int idx = std::stoi(digits);
  if (idx < 0 || idx >= kRegsPerFile) c.fail("register index out of range");
  return RegRef{file, idx};
}

int64_t parse_int(Cursor& c) {
  c.skip_ws();
  size_t start = c.pos;
  bool neg = c.accept('-');
  c.skip_ws();
  int64_t value = 0;
  if (c.s.compare(c.pos, 2, "0x") == 0 || c.s.compare(c.pos, 2, "0X") == 0) {
    c.pos += 2;
    size_t digits = 0;
    while (c.pos < c.s.size() && std::isxdigit(static_cast<unsigned char>(c.s[c.pos]))) {
      value = value * 16 + (std::isdigit(static_cast<unsigned char>(c.s[c.pos]))
                                ? c.s[c.pos] - '0'
                                : std::tolower(c.s[c.pos]) - 'a' + 10);
      ++c.pos;
      ++digits;
    }
    if (!digits) { c.pos = start; c.fail("expected hex digits"); }
  } else {
    size_t digits = 0;
    while (c.pos < c.s.size() && std::isdigit(static_cast<unsigned char>(c.s[c.pos]))) {
      value = value * 10 + (c.s[c.pos] - '0');
      ++c.pos;
      ++digits;
    }
    if (!digits) { c.pos = start; c.fail("expected number"); }
  }
  return neg ? -value : value;
}

// #imm where a '.' or exponent marks a float literal
Operand parse_immediate(Cursor& c, bool allowFloat) {
  c.expect('#');
  size_t probe = c.pos;
  bool isFloat = false;
  while (probe < c.s.size() &&
         (std::isdigit(static_cast<unsigned char>(c.s[probe])) || c.s[probe] == '-' ||
          c.s[probe] == '+' || c.s[probe] == '.' || c.s[probe] == 'e' || c.s[probe] == 'E')) {
    if (c.s[probe] == '.' || c.s[probe] == 'e' || c.s[probe] == 'E') isFloat = true;
    ++probe;
  }
  if (isFloat) {
    if (!allowFloat) c.fail("float immediate not allowed here");
    size_t consumed = 0;
    float v = std::stof(c.s.substr(c.pos), &consumed);
    c.pos += consumed;
    return Operand::make_fimm(v);
  }
  return Operand::make_imm(parse_int(c));
}

Operand parse_mem(Cursor& c) {
  c.expect('[');
  RegRef base = parse_reg(c);
  int64_t offset = 0;
  if (c.accept(',')) {
    c.expect('#');
    offset = parse_int(c);
  }
  c.expect(']');
  // post-increment: "], #amount"
  size_t save = c.pos;
  if (c.accept(',')) {
    if (c.peek() == '#') {
      ++c.pos;
      int64_t amount = parse_int(c);
      Operand o = Operand::make_mem_post(base, amount);
      o.offset = offset;
      return o;
    }
    c.pos = save;
  }
  return Operand::make_mem(base, offset);
}

// register or lane-selected register
Operand parse_reg_or_lane(Cursor& c) {
  RegRef r = parse_reg(c);
  if (c.s.compare(c.pos, 3, ".s[") == 0) {
    c.pos += 3;
    int lane = static_cast<int>(parse_int(c));
    c.expect(']');
    if (lane < 0 || lane >= kVecLanes) c.fail("lane out of range");
    return Operand::make_lane(r, lane);
  }
  return Operand::make_reg(r);
}

std::vector<uint8_t> parse_hex_bytes(Cursor& c) {
  std::vector<uint8_t> out;
  while (!c.eof()) {
    c.skip_ws();
    int hi = -1, lo = -1;
    auto hexval = [](char ch) -> int {
      if (std::isdigit(static_cast<unsigned char>(ch))) return ch - '0';
      ch = static_cast<char>(std::tolower(ch));
      if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
      return -1;
    };
    if (c.pos < c.s.size()) hi = hexval(c.s[c.pos]);
    if (c.pos + 1 < c.s.size()) lo = hexval(c.s[c.pos + 1]);
    if (hi < 0 || lo < 0) c.fail("expected hex byte");
    out.push_back(static_cast<uint8_t>(hi * 16 + lo));
    c.pos += 2;
  }
  return out;
}

SasaEntry parse_sasa_entry(Cursor& c) {
  c.expect('{');
  SasaEntry e;
  bool sawPc = false, sawCond = false, sawLen = false;
  while (true) {
    std::string key = c.ident();
    c.expect('=');
    if (key == "pc") {
      e.precedingPC = static_cast<int>(parse_int(c));
      sawPc = true;
    } else if (key == "cond") {
      c.skip_ws();
      size_t start = c.pos;
      while (c.pos < c.s.size() && c.s[c.pos] != ',' && c.s[c.pos] != '}') ++c.pos;
      std::string txt = c.s.substr(start, c.pos - start);
      while (!txt.empty() && (txt.back() == ' ' || txt.back() == '\t')) txt.pop_back();
      try {
        e.condition = cond_from_string(txt);
      } catch (const std::exception& ex) {
        c.fail(ex.what());
      }
      sawCond = true;
    } else if (key == "len") {
      e.instsToSkip = static_cast<int>(parse_int(c));
      sawLen = true;
    } else {
      c.fail("unknown SASA entry key: " + key);
    }
    if (c.accept(',')) continue;
    c.expect('}');
    break;
  }
  if (!sawPc || !sawCond || !sawLen) c.fail("SASA entry needs pc, cond and len");
  return e;
}

struct PendingLabel {
  std::string name;
  int line;
};

}  // namespace

Program parse_program(const std::string& text) {
  Program prog;
  std::vector<PendingLabel> pendingLabels;
  struct BranchFix { int pc; std::string label; int line; int col; };
  std::vector<BranchFix> fixups;

  std::istringstream in(text);
  std::string rawLine;
  int lineNo = 0;
  while (std::getline(in, rawLine)) {
    ++lineNo;
    std::string lineTxt = rawLine;
    size_t semi = lineTxt.find(';');
    if (semi != std::string::npos) lineTxt.resize(semi);
    Cursor c(lineTxt, lineNo);
    if (c.eof()) continue;

    if (c.peek() == '.') {
      ++c.pos;
      std::string dir = c.ident();
      if (dir == "label") {
        std::string name = c.ident();
        c.expect(':');
        if (!c.eof()) c.fail("trailing text after label directive");
        if (prog.labels.count(name))
          throw AsmError(lineNo, 1, "duplicate label: " + name);
        prog.labels[name] = -1;  // provisional; bound below
        pendingLabels.push_back({name, lineNo});
      } else if (dir == "data") {
        c.skip_ws();
        uint64_t addr = static_cast<uint64_t>(parse_int(c));
        c.expect(':');
        DataBlock b;
        b.addr = addr;
        b.bytes = parse_hex_bytes(c);
        prog.data.push_back(std::move(b));
      } else if (dir == "sasa") {
        std::string name = c.ident();
        c.expect(':');
        SasaBlock b;
        b.name = name;
        while (!c.eof()) {
          b.entries.push_back(parse_sasa_entry(c));
          c.accept(',');
        }
        for (const auto& existing : prog.sasaBlocks)
          if (existing.name == name)
            throw AsmError(lineNo, 1, "duplicate SASA block: " + name);
        prog.sasaBlocks.push_back(std::move(b));
      } else {
        c.fail("unknown directive ." + dir);
      }
      continue;
    }

    // instruction line
    std::string mnemonic = c.ident();
    auto opc = opcode_from_string(mnemonic);
    if (!opc) throw AsmError(lineNo, 1, "unknown opcode: " + mnemonic);
    Instruction inst;
    inst.op = *opc;
    inst.line = lineNo;

    switch (inst.op) {
      case Opcode::LD:
      case Opcode::VLD: {
        inst.dst = parse_reg(c);
        c.expect(',');
        inst.srcs.push_back(parse_mem(c));
        break;
      }
      case Opcode::ST:
      case Opcode::VST: {
        // store: value register is a source
        inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        c.expect(',');
        inst.srcs.push_back(parse_mem(c));
        break;
      }
      case Opcode::PRFM: {
        inst.srcs.push_back(parse_mem(c));
        break;
      }
      case Opcode::FMUL:
      case Opcode::FADD:
      case Opcode::FMLA: {
        inst.dst = parse_reg(c);
        c.expect(',');
        inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        c.expect(',');
        inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        break;
      }
      case Opcode::VFMLA: {
        inst.dst = parse_reg(c);
        c.expect(',');
        inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        c.expect(',');
        inst.srcs.push_back(parse_reg_or_lane(c));
        break;
      }
      case Opcode::ADD:
      case Opcode::SUB:
      case Opcode::SUBS: {
        inst.dst = parse_reg(c);
        c.expect(',');
        inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        c.expect(',');
        if (c.peek() == '#') inst.srcs.push_back(parse_immediate(c, false));
        else inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        break;
      }
      case Opcode::MOV: {
        inst.dst = parse_reg(c);
        c.expect(',');
        char p = c.peek();
        if (p == '#') {
          bool fp = inst.dst->file != RegFile::Int;
          Operand o = parse_immediate(c, fp);
          if (fp && o.kind == Operand::Kind::Imm) {
            // integer literal into fp/vec register moves that value as a float
            o = Operand::make_fimm(static_cast<float>(o.imm));
          }
          inst.srcs.push_back(o);
        } else if (p == '=') {
          ++c.pos;
          Operand o;
          o.kind = Operand::Kind::Symbol;
          o.symbol = c.ident();
          inst.srcs.push_back(o);
        } else {
          inst.srcs.push_back(Operand::make_reg(parse_reg(c)));
        }
        break;
      }
      case Opcode::B:
      case Opcode::BNE:
      case Opcode::BEQ: {
        c.skip_ws();
        int col = c.col();
        std::string target = c.ident();
        inst.labelRef = target;
        fixups.push_back({static_cast<int>(prog.instructions.size()), target, lineNo, col});
        break;
      }
      case Opcode::SASALD: {
        // SASALD [Rn], #size
        c.expect('[');
        RegRef base = parse_reg(c);
        c.expect(']');
        c.expect(',');
        inst.srcs.push_back(Operand::make_mem(base));
        inst.srcs.push_back(parse_immediate(c, false));
        break;
      }
      case Opcode::HALT:
        break;
    }
    if (!c.eof()) c.fail("trailing text after instruction");

    int pc = static_cast<int>(prog.instructions.size());
    for (const auto& pl : pendingLabels) prog.labels[pl.name] = pc;
    pendingLabels.clear();
    prog.instructions.push_back(std::move(inst));
  }

  if (!pendingLabels.empty())
    throw AsmError(pendingLabels.front().line, 1,
                   "label at end of program has no instruction: " + pendingLabels.front().name);

  for (const auto& f : fixups) {
    auto it = prog.labels.find(f.label);
    if (it == prog.labels.end())
      throw AsmError(f.line, f.col, "unresolved label: " + f.label);
    prog.instructions[f.pc].branchTarget = it->second;
  }

  // Resolve MOV symbol operands against SASA block names; assign block
  // addresses first (sequential from a fixed origin, 64-byte aligned).
  uint64_t next = kSasaBlockOrigin;
  for (auto& b : prog.sasaBlocks) {
    b.addr = next;
    uint64_t size = b.entries.size() * kSasaEntryBytes;
    next = (next + size + 63) & ~uint64_t{63};
  }
  for (auto& inst : prog.instructions) {
    for (auto& s : inst.srcs) {
      if (s.kind == Operand::Kind::Symbol) {
        auto addr = prog.symbol_address(s.symbol);
        if (!addr)
          throw AsmError(inst.line, 1, "unresolved symbol: " + s.symbol);
        std::string name = s.symbol;
        s = Operand::make_imm(static_cast<int64_t>(*addr));
        s.symbol = name;  // keep name so printing round-trips
        s.kind = Operand::Kind::Symbol;
        s.imm = static_cast<int64_t>(*addr);
      }
    }
  }
  return prog;
}

// --- printer -------------------------------------------------------------------

static std::string operand_to_string(const Operand& o) {
  std::ostringstream out;
  switch (o.kind) {
    case Operand::Kind::Reg: out << reg_name(o.reg); break;
    case Operand::Kind::Lane: out << reg_name(o.reg) << ".s[" << o.lane << "]"; break;
    case Operand::Kind::Imm: out << "#" << o.imm; break;
    case Operand::Kind::FImm: {
      std::ostringstream f;
      f << o.fimm;
      std::string s = f.str();
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
          s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
      out << "#" << s;
      break;
    }
    case Operand::Kind::Mem:
      out << "[" << reg_name(o.base);
      if (o.offset != 0) out << ", #" << o.offset;
      out << "]";
      if (o.postInc) out << ", #" << o.postAmount;
      break;
    case Operand::Kind::Symbol: out << "=" << o.symbol; break;
  }
  return out.str();
}

std::string print_program(const Program& p) {
  std::ostringstream out;
  for (const auto& d : p.data) {
    out << ".data 0x" << std::hex << d.addr << std::dec << ":";
    char buf[4];
    for (uint8_t b : d.bytes) {
      std::snprintf(buf, sizeof buf, "%02x", b);
      out << " " << buf;
    }
    out << "\n";
  }
  for (const auto& b : p.sasaBlocks) {
    out << ".sasa " << b.name << ":";
    for (const auto& e : b.entries)
      out << " {pc=" << e.precedingPC << ", cond=" << cond_to_string(e.condition)
          << ", len=" << e.instsToSkip << "}";
    out << "\n";
  }
  std::multimap<int, std::string> labelsAt;
  for (const auto& [name, pc] : p.labels) labelsAt.insert({pc, name});
  for (int pc = 0; pc < static_cast<int>(p.instructions.size()); ++pc) {
    auto range = labelsAt.equal_range(pc);
    for (auto it = range.first; it != range.second; ++it)
      out << ".label " << it->second << ":\n";
    const Instruction& inst = p.instructions[pc];
    out << "  " << opcode_name(inst.op);
    bool first = true;
    if (inst.op == Opcode::SASALD) {
      out << " [" << reg_name(inst.srcs[0].base) << "], #" << inst.srcs[1].imm;
    } else {
      if (inst.is_branch()) {
        out << " " << inst.labelRef;
      } else {
        if (inst.dst && !inst.is_store()) {
          out << " " << reg_name(*inst.dst);
          first = false;
        }
        for (const auto& s : inst.srcs) {
          out << (first ? " " : ", ") << operand_to_string(s);
          first = false;
        }
      }
    }
    out << "\n";
  }
  return out.str();
}

// --- validation ----------------------------------------------------------------

std::vector<Diagnostic> validate(const Program& p) {
  std::vector<Diagnostic> diags;
  const int n = static_cast<int>(p.instructions.size());
  for (int pc = 0; pc < n; ++pc) {
    const Instruction& inst = p.instructions[pc];
    int srcRegs = 0;
    for (const auto& s : inst.srcs)
      if (s.kind == Operand::Kind::Reg || s.kind == Operand::Kind::Lane) ++srcRegs;
    if (srcRegs > 2)
      diags.push_back({pc, "operand count: more than 2 source register operands"});
    if (inst.dst && (inst.dst->index < 0 || inst.dst->index >= kRegsPerFile))
      diags.push_back({pc, "destination register index out of range"});
    for (const auto& s : inst.srcs) {
      if ((s.kind == Operand::Kind::Reg || s.kind == Operand::Kind::Lane) &&
          (s.reg.index < 0 || s.reg.index >= kRegsPerFile))
        diags.push_back({pc, "source register index out of range"});
      if (s.kind == Operand::Kind::Lane && (s.lane < 0 || s.lane >= kVecLanes))
        diags.push_back({pc, "lane out of range"});
      if (s.kind == Operand::Kind::Mem && s.postInc &&
          !(inst.op == Opcode::LD || inst.op == Opcode::VLD || inst.op == Opcode::ST ||
            inst.op == Opcode::VST))
        diags.push_back({pc, "post-increment is legal only on LD/VLD/ST/VST"});
    }
    if (inst.op == Opcode::VFMLA) {
      if (inst.srcs.size() != 2 || inst.srcs[1].kind != Operand::Kind::Lane)
        diags.push_back({pc, "VFMLA second multiplier must be a lane-selected register"});
      if (inst.dst && inst.dst->file != RegFile::Vec)
        diags.push_back({pc, "VFMLA destination must be a vector register"});
    }
    if ((inst.op == Opcode::FMUL || inst.op == Opcode::FADD || inst.op == Opcode::FMLA)) {
      if (inst.dst && inst.dst->file != RegFile::Fp)
        diags.push_back({pc, "scalar FP op needs an f register destination"});
    }
    if (inst.is_branch()) {
      if (inst.branchTarget < 0 || inst.branchTarget >= n)
        diags.push_back({pc, "unresolved target"});
    }
  }
  // data blocks (including serialized SASA payloads) must not overlap
  auto blocks = p.all_data_blocks();
  std::vector<std::pair<uint64_t, uint64_t>> ranges;
  for (const auto& b : blocks)
    if (!b.bytes.empty()) ranges.push_back({b.addr, b.addr + b.bytes.size()});
  std::sort(ranges.begin(), ranges.end());
  for (size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      diags.push_back({-1, "data blocks overlap"});
  // SASA entries must fit the program
  for (const auto& b : p.sasaBlocks)
    for (const auto& e : b.entries) {
      if (e.precedingPC < 0 || e.precedingPC + e.instsToSkip >= n)
        diags.push_back({-1, "SASA entry range exceeds program length (block " + b.name + ")"});
      if (e.instsToSkip <= 0)
        diags.push_back({-1, "SASA entry instsToSkip must be positive (block " + b.name + ")"});
    }
  return diags;
}

}  // namespace sparce
