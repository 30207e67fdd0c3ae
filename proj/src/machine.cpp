#include "sparce/machine.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "json.hpp"

namespace sparce {

// --- Memory ----------------------------------------------------------------

uint8_t Memory::read8(uint64_t addr) const {
  auto it = pages_.find(addr >> kPageBits);
  if (it == pages_.end()) return 0;
  return it->second[addr & (kPageSize - 1)];
}

void Memory::write8(uint64_t addr, uint8_t v) {
  auto& page = pages_[addr >> kPageBits];
  page[addr & (kPageSize - 1)] = v;
}

void Memory::read(uint64_t addr, uint8_t* out, size_t n) const {
  for (size_t i = 0; i < n; ++i) out[i] = read8(addr + i);
}

void Memory::write(uint64_t addr, const uint8_t* in, size_t n) {
  for (size_t i = 0; i < n; ++i) write8(addr + i, in[i]);
}

uint32_t Memory::read32(uint64_t addr) const {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(read8(addr + i)) << (8 * i);
  return v;
}

void Memory::write32(uint64_t addr, uint32_t v) {
  for (int i = 0; i < 4; ++i) write8(addr + i, static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t Memory::read64(uint64_t addr) const {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(read8(addr + i)) << (8 * i);
  return v;
}

void Memory::write64(uint64_t addr, uint64_t v) {
  for (int i = 0; i < 8; ++i) write8(addr + i, static_cast<uint8_t>(v >> (8 * i)));
}

float Memory::read_f32(uint64_t addr) const { return std::bit_cast<float>(read32(addr)); }

void Memory::write_f32(uint64_t addr, float v) { write32(addr, std::bit_cast<uint32_t>(v)); }

// --- MachineState ------------------------------------------------------------

Value MachineState::read_reg(const RegRef& r) const {
  switch (r.file) {
    case RegFile::Int: return Value::of_int(intRegs[r.index]);
    case RegFile::Fp: return Value::of_f32(fpRegs[r.index]);
    case RegFile::Vec: return Value::of_vec(vecRegs[r.index]);
  }
  return {};
}

void MachineState::write_reg(const RegRef& r, const Value& v) {
  switch (r.file) {
    case RegFile::Int: intRegs[r.index] = v.i; break;
    case RegFile::Fp: fpRegs[r.index] = v.v[0]; break;
    case RegFile::Vec: vecRegs[r.index] = v.v; break;
  }
}

// --- semantics ---------------------------------------------------------------

namespace {

uint64_t effective_addr(const Operand& mem, const MachineState& st) {
  return st.intRegs[mem.base.index] + static_cast<uint64_t>(mem.offset);
}

float scalar_of(const Operand& o, const MachineState& st) {
  if (o.kind == Operand::Kind::Reg) return st.fpRegs[o.reg.index];
  if (o.kind == Operand::Kind::FImm) return o.fimm;
  throw ExecError("expected fp register operand");
}

uint64_t int_src(const Operand& o, const MachineState& st) {
  if (o.kind == Operand::Kind::Reg) return st.intRegs[o.reg.index];
  if (o.kind == Operand::Kind::Imm || o.kind == Operand::Kind::Symbol)
    return static_cast<uint64_t>(o.imm);
  throw ExecError("expected integer register or immediate");
}

void add_post_increment(const Instruction& instr, const MachineState& st, Effect& e) {
  const Operand* m = instr.mem_operand();
  if (m && m->postInc) {
    uint64_t nv = st.intRegs[m->base.index] + static_cast<uint64_t>(m->postAmount);
    e.regWrites.push_back({m->base, Value::of_int(nv)});
  }
}

}  // namespace

Effect exec_semantics(const Instruction& instr, const MachineState& st) {
  Effect e;
  e.nextPC = st.pc + 1;
  switch (instr.op) {
    case Opcode::LD: {
      const Operand& m = instr.srcs[0];
      uint64_t addr = effective_addr(m, st);
      e.memAddr = addr;
      if (instr.dst->file == RegFile::Fp) {
        e.memBytes = 4;
        e.regWrites.push_back({*instr.dst, Value::of_f32(st.memory.read_f32(addr))});
      } else {
        e.memBytes = 8;
        e.regWrites.push_back({*instr.dst, Value::of_int(st.memory.read64(addr))});
      }
      add_post_increment(instr, st, e);
      break;
    }
    case Opcode::VLD: {
      const Operand& m = instr.srcs[0];
      uint64_t addr = effective_addr(m, st);
      if (addr % 16 != 0) throw ExecError("unaligned vector access");
      e.memAddr = addr;
      e.memBytes = 16;
      std::array<float, kVecLanes> v;
      for (int k = 0; k < kVecLanes; ++k) v[k] = st.memory.read_f32(addr + 4 * k);
      e.regWrites.push_back({*instr.dst, Value::of_vec(v)});
      add_post_increment(instr, st, e);
      break;
    }
    case Opcode::ST: {
      const Operand& m = instr.srcs[1];
      uint64_t addr = effective_addr(m, st);
      e.memAddr = addr;
      const RegRef src = instr.srcs[0].reg;
      MemWrite w{addr, {}};
      if (src.file == RegFile::Fp) {
        e.memBytes = 4;
        uint32_t bits = std::bit_cast<uint32_t>(st.fpRegs[src.index]);
        for (int i = 0; i < 4; ++i) w.bytes.push_back(static_cast<uint8_t>(bits >> (8 * i)));
      } else {
        e.memBytes = 8;
        uint64_t bits = st.intRegs[src.index];
        for (int i = 0; i < 8; ++i) w.bytes.push_back(static_cast<uint8_t>(bits >> (8 * i)));
      }
      e.memWrites.push_back(std::move(w));
      add_post_increment(instr, st, e);
      break;
    }
    case Opcode::VST: {
      const Operand& m = instr.srcs[1];
      uint64_t addr = effective_addr(m, st);
      if (addr % 16 != 0) throw ExecError("unaligned vector access");
      e.memAddr = addr;
      e.memBytes = 16;
      const RegRef src = instr.srcs[0].reg;
      MemWrite w{addr, {}};
      for (int k = 0; k < kVecLanes; ++k) {
        uint32_t bits = std::bit_cast<uint32_t>(st.vecRegs[src.index][k]);
        for (int i = 0; i < 4; ++i) w.bytes.push_back(static_cast<uint8_t>(bits >> (8 * i)));
      }
      e.memWrites.push_back(std::move(w));
      add_post_increment(instr, st, e);
      break;
    }
    case Opcode::PRFM: {
      // cache-state only; no architectural effect
      e.memAddr = effective_addr(instr.srcs[0], st);
      e.memBytes = 1;
      break;
    }
    case Opcode::FMUL: {
      float a = scalar_of(instr.srcs[0], st), b = scalar_of(instr.srcs[1], st);
      e.regWrites.push_back({*instr.dst, Value::of_f32(a * b)});
      break;
    }
    case Opcode::FADD: {
      float a = scalar_of(instr.srcs[0], st), b = scalar_of(instr.srcs[1], st);
      e.regWrites.push_back({*instr.dst, Value::of_f32(a + b)});
      break;
    }
    case Opcode::FMLA: {
      // dst <- dst + src1*src2, fused (single rounding)
      float acc = st.fpRegs[instr.dst->index];
      float a = scalar_of(instr.srcs[0], st), b = scalar_of(instr.srcs[1], st);
      e.regWrites.push_back({*instr.dst, Value::of_f32(std::fmaf(a, b, acc))});
      break;
    }
    case Opcode::VFMLA: {
      // dst[k] <- dst[k] + src1[k]*broadcast, per lane, fused
      const Operand& mul = instr.srcs[1];
      if (mul.kind != Operand::Kind::Lane) throw ExecError("VFMLA needs a lane-selected multiplier");
      if (mul.lane < 0 || mul.lane >= kVecLanes) throw ExecError("out-of-range lane");
      float broadcast = st.vecRegs[mul.reg.index][mul.lane];
      std::array<float, kVecLanes> acc = st.vecRegs[instr.dst->index];
      const std::array<float, kVecLanes>& a = st.vecRegs[instr.srcs[0].reg.index];
      for (int k = 0; k < kVecLanes; ++k) acc[k] = std::fmaf(a[k], broadcast, acc[k]);
      e.regWrites.push_back({*instr.dst, Value::of_vec(acc)});
      break;
    }
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::SUBS: {
      if (instr.dst->file == RegFile::Int) {
        uint64_t a = int_src(instr.srcs[0], st), b = int_src(instr.srcs[1], st);
        uint64_t r = (instr.op == Opcode::ADD) ? a + b : a - b;
        e.regWrites.push_back({*instr.dst, Value::of_int(r)});
        if (instr.op == Opcode::SUBS) e.flagWrite = (r == 0);
      } else {
        throw ExecError("integer op on non-integer register");
      }
      break;
    }
    case Opcode::MOV: {
      const Operand& s = instr.srcs[0];
      switch (instr.dst->file) {
        case RegFile::Int:
          e.regWrites.push_back({*instr.dst, Value::of_int(int_src(s, st))});
          break;
        case RegFile::Fp: {
          float v = (s.kind == Operand::Kind::Reg) ? st.fpRegs[s.reg.index] : s.fimm;
          e.regWrites.push_back({*instr.dst, Value::of_f32(v)});
          break;
        }
        case RegFile::Vec: {
          std::array<float, kVecLanes> v;
          if (s.kind == Operand::Kind::Reg) v = st.vecRegs[s.reg.index];
          else v.fill(s.fimm);  // immediate splats to all lanes
          e.regWrites.push_back({*instr.dst, Value::of_vec(v)});
          break;
        }
      }
      break;
    }
    case Opcode::B:
      e.branchTaken = true;
      e.nextPC = instr.branchTarget;
      break;
    case Opcode::BNE:
      if (!st.zeroFlag) { e.branchTaken = true; e.nextPC = instr.branchTarget; }
      break;
    case Opcode::BEQ:
      if (st.zeroFlag) { e.branchTaken = true; e.nextPC = instr.branchTarget; }
      break;
    case Opcode::SASALD:
      // table load handled by the skip machinery; architecturally a no-op
      break;
    case Opcode::HALT:
      e.halt = true;
      break;
  }
  return e;
}

void apply_effect(const Effect& e, MachineState& st) {
  for (const auto& w : e.regWrites) st.write_reg(w.reg, w.value);
  for (const auto& w : e.memWrites) st.memory.write(w.addr, w.bytes.data(), w.bytes.size());
  if (e.flagWrite) st.zeroFlag = *e.flagWrite;
  st.pc = e.nextPC;
}

MachineState run_functional(const Program& prog, MachineState state, uint64_t maxSteps) {
  seed_program_data(prog, state);
  state.pc = 0;
  for (uint64_t step = 0; step < maxSteps; ++step) {
    if (state.pc < 0 || state.pc >= static_cast<int>(prog.instructions.size()))
      throw ExecError("pc ran off the program");
    Effect e = exec_semantics(prog.instructions[state.pc], state);
    apply_effect(e, state);
    if (e.halt) return state;
  }
  throw ExecError("functional run exceeded step limit");
}

void seed_program_data(const Program& prog, MachineState& state) {
  for (const auto& b : prog.all_data_blocks())
    state.memory.write(b.addr, b.bytes.data(), b.bytes.size());
}

// --- DCache --------------------------------------------------------------------

DCache::DCache(uint64_t sizeBytes, uint64_t lineBytes, uint64_t assoc, int hitLatency,
               int missLatency)
    : lineBytes_(lineBytes),
      assoc_(assoc),
      numSets_(sizeBytes / (lineBytes * assoc)),
      hitLatency_(hitLatency),
      missLatency_(missLatency) {
  if (numSets_ == 0) throw ExecError("cache too small for line size and associativity");
  sets_.resize(numSets_);
}

DCache::AccessResult DCache::access(uint64_t addr, size_t bytes) {
  if (bytes > lineBytes_) throw ExecError("access larger than a cache line");
  if (bytes > 0 && (addr / lineBytes_) != ((addr + bytes - 1) / lineBytes_))
    throw ExecError("access straddles a cache line");
  uint64_t lineAddr = addr / lineBytes_;
  uint64_t setIdx = lineAddr % numSets_;
  uint64_t tag = lineAddr / numSets_;
  auto& set = sets_[setIdx];
  ++stats_.accesses;
  for (auto it = set.begin(); it != set.end(); ++it) {
    if (*it == tag) {
      set.erase(it);
      set.push_front(tag);
      ++stats_.hits;
      return {hitLatency_, true};
    }
  }
  ++stats_.misses;
  set.push_front(tag);
  if (set.size() > assoc_) set.pop_back();
  return {missLatency_, false};
}

// --- config --------------------------------------------------------------------

SimConfig config_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SimConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("l1_size", c.l1_size);
  get("l1_line", c.l1_line);
  get("l1_assoc", c.l1_assoc);
  get("l1_hit", c.l1_hit);
  get("l1_miss", c.l1_miss);
  get("fadd_lat", c.fadd_lat);
  get("fmul_lat", c.fmul_lat);
  get("fmla_lat", c.fmla_lat);
  get("vfmla_lat", c.vfmla_lat);
  get("int_lat", c.int_lat);
  get("branch_penalty", c.branch_penalty);
  get("cycle_limit", c.cycle_limit);
  get("sasa_capacity", c.sasa_capacity);
  get("trap_nonfinite", c.trap_nonfinite);
  return c;
}

SimConfig config_from_json_file(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::string text;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
  std::fclose(f);
  return config_from_json_text(text);
}

std::string config_to_json(const SimConfig& c) {
  nlohmann::json j{
      {"l1_size", c.l1_size},     {"l1_line", c.l1_line},
      {"l1_assoc", c.l1_assoc},   {"l1_hit", c.l1_hit},
      {"l1_miss", c.l1_miss},     {"fadd_lat", c.fadd_lat},
      {"fmul_lat", c.fmul_lat},   {"fmla_lat", c.fmla_lat},
      {"vfmla_lat", c.vfmla_lat}, {"int_lat", c.int_lat},
      {"branch_penalty", c.branch_penalty},
      {"cycle_limit", c.cycle_limit},
      {"sasa_capacity", c.sasa_capacity},
      {"trap_nonfinite", c.trap_nonfinite},
  };
  return j.dump(2);
}

}  // namespace sparce
