#include "sparce/pipeline.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <optional>

namespace sparce {

namespace {

struct InflightInst {
  int pc{0};
  const Instruction* instr{nullptr};
  uint64_t seq{0};             // fetch order, for wrong-path squashes
  int regionTag{-1};
  bool marked{false};          // scoreboard / SpRF marks applied at decode entry
  bool resolvedBranch{false};
  bool branchTaken{false};
  int remaining{0};            // execute cycles left
};

struct MemAccessInfo {
  uint64_t addr;
  size_t bytes;
};

MemAccessInfo mem_access_info(const Instruction& inst, const MachineState& st) {
  const Operand* m = inst.mem_operand();
  uint64_t addr = st.intRegs[m->base.index] + static_cast<uint64_t>(m->offset);
  size_t bytes = 1;
  switch (inst.op) {
    case Opcode::LD:
      bytes = (inst.dst->file == RegFile::Fp) ? 4 : 8;
      break;
    case Opcode::ST:
      bytes = (inst.srcs[0].reg.file == RegFile::Fp) ? 4 : 8;
      break;
    case Opcode::VLD:
    case Opcode::VST:
      bytes = 16;
      break;
    case Opcode::PRFM:
      bytes = 1;
      break;
    default:
      break;
  }
  return {addr, bytes};
}

class Pipeline {
 public:
  Pipeline(const Program& prog, const MachineState& init, const SimConfig& cfg, Mode mode)
      : prog_(prog),
        cfg_(cfg),
        mode_(mode),
        state_(init),
        cache_(cfg),
        table_(cfg.sasa_capacity) {
    seed_program_data(prog_, state_);
    state_.pc = 0;
    scoreboard_.fill(0);
  }

  SimResult run() {
    while (true) {
      ++stats_.cycles;
      if (stats_.cycles > cfg_.cycle_limit)
        throw SimError("cycle limit exceeded: runaway program");

      tick_execute();
      bool haltNow = commit_writeback();
      do_decode_issue();
      do_fetch_to_decode();
      region_tick();
      do_fetch();
      apply_redirect();

      if (haltNow) break;
    }
    finalize_stats();
    return SimResult{state_, stats_, std::move(trace_), sprf_};
  }

 private:
  // --- per-cycle phases, in order -------------------------------------------

  void tick_execute() {
    if (ex_ && --ex_->remaining <= 0) {
      wb_ = std::move(ex_);
      ex_.reset();
    }
  }

  bool commit_writeback() {
    if (!wb_) return false;
    InflightInst rec = *wb_;
    wb_.reset();

    state_.pc = rec.pc;
    Effect e = exec_semantics(*rec.instr, state_);
    if (rec.instr->is_branch()) {
      // decode-time resolution must agree with architectural semantics
      assert(rec.resolvedBranch && e.branchTaken == rec.branchTaken);
    }
    apply_effect(e, state_);
    unmark_scoreboard(rec);
    if (mode_ == Mode::Sparce) {
      // svc_commit refreshes isSparse and retires the in-flight mark
      for (const auto& w : e.regWrites) svc_commit(sprf_, w.reg, w.value);
      if (rec.instr->op == Opcode::SASALD) {
        uint64_t base = state_.intRegs[rec.instr->srcs[0].base.index];
        int count = static_cast<int>(rec.instr->srcs[1].imm);
        try {
          table_.load(state_.memory, base, count,
                      static_cast<int>(prog_.instructions.size()));
        } catch (const std::exception& ex) {
          throw SimError(std::string("SASALD failed: ") + ex.what());
        }
      }
    }
    ++stats_.executed;
    if (cfg_.collect_traces) trace_.committedPcs.push_back(rec.pc);
    return e.halt;
  }

  void do_decode_issue() {
    // resolve as soon as the flag is free so the redirect is not delayed
    if (de_ && de_->instr->is_branch() && !de_->resolvedBranch) try_resolve_branch(*de_);
    // classify the cycle from the issue slot's point of view
    if (!ex_ && de_) {
      bool branchReady = !de_->instr->is_branch() || de_->resolvedBranch;
      if (branchReady && !has_hazard(*de_)) {
        issue(*de_);
        de_.reset();
        ++stats_.busyIssueCycles;
        return;
      }
      ++stats_.stallDataHazard;
      return;
    }
    if (de_) {
      // blocked by the execute unit
      if (ex_->instr->is_mem()) ++stats_.stallMemWait;
      else ++stats_.stallExecBusy;
      return;
    }
    ++stats_.frontendBubbles;
  }

  void do_fetch_to_decode() {
    if (de_ || !fe_ || redirect_) return;  // a redirecting frontend holds wrong-path work
    de_ = std::move(fe_);
    fe_.reset();
    mark(*de_);
    if (de_->instr->is_branch()) try_resolve_branch(*de_);
  }

  void region_tick() {
    if (mode_ != Mode::Sparce || !pending_) return;
    Tri verdict = eval_condition(pending_->condition, sprf_);
    if (verdict == Tri::True) {
      resolve_region_skip();
    } else if (verdict == Tri::False) {
      clear_region_tags();
      pending_.reset();
      ++stats_.regionsAbortedExecute;
    } else if (nextFetchPC_ > pending_->endPC && !region_in_flight()) {
      // every region instruction already committed; nothing left to decide
      pending_.reset();
      ++stats_.regionsAbortedExecute;
    }
  }

  void do_fetch() {
    if (fetchStall_ > 0) {
      --fetchStall_;
      return;
    }
    if (fe_ || haltFetched_ || redirect_) return;
    if (nextFetchPC_ < 0 || nextFetchPC_ >= static_cast<int>(prog_.instructions.size()))
      return;

    int pc = nextFetchPC_;
    InflightInst rec;
    rec.pc = pc;
    rec.instr = &prog_.instructions[pc];
    rec.seq = ++fetchSeq_;
    if (pending_ && pc >= pending_->startPC && pc <= pending_->endPC)
      rec.regionTag = pending_->id;
    fe_ = rec;
    ++stats_.fetched;
    if (cfg_.collect_traces) trace_.fetchedPcs.push_back(pc);
    if (rec.instr->op == Opcode::HALT) haltFetched_ = true;

    if (mode_ != Mode::Sparce) {
      nextFetchPC_ = pc + 1;
      return;
    }
    PsruDecision d = psru_decide(pc, table_, sprf_, pending_, nextRegionId_);
    if (d.sasaHit) ++stats_.sasaHits;
    switch (d.action) {
      case PsruDecision::Action::Normal:
        nextFetchPC_ = d.nextFetchPC;
        break;
      case PsruDecision::Action::Skip:
        count_skip_range(pc + 1, d.region->endPC);
        nextFetchPC_ = d.nextFetchPC;
        break;
      case PsruDecision::Action::EnterPending:
        if (pending_) {
          // old region could not be resolved before another hit; abort it
          clear_region_tags();
          pending_.reset();
          ++stats_.regionsAbortedExecute;
          ++stats_.regionConflicts;
        }
        pending_ = d.region;
        ++nextRegionId_;
        ++stats_.regionsEntered;
        nextFetchPC_ = d.nextFetchPC;
        break;
      case PsruDecision::Action::ResolveSkip:
        // the just-fetched pc is a region member: it was fetched (and is
        // squashed by the resolve); only later pcs count as never-fetched
        nextFetchPC_ = pc + 1;
        resolve_region_skip();
        break;
      case PsruDecision::Action::ResolveExecute:
        clear_region_tags();
        pending_.reset();
        ++stats_.regionsAbortedExecute;
        nextFetchPC_ = d.nextFetchPC;
        break;
    }
  }

  void apply_redirect() {
    if (!redirect_) return;
    // everything fetched after the branch is wrong-path; it can sit in the
    // fetch slot or have just advanced into decode
    for (auto* slot : {&fe_, &de_}) {
      if (*slot && (*slot)->seq > redirectSeq_) {
        squash(**slot);
        slot->reset();
      }
    }
    nextFetchPC_ = *redirect_;
    haltFetched_ = false;
    redirect_.reset();
    fetchStall_ = cfg_.branch_penalty > 0 ? cfg_.branch_penalty - 1 : 0;
    if (pending_) {
      // region opened on (or orphaned by) the wrong path; drop it
      clear_region_tags();
      pending_.reset();
      ++stats_.regionsAbortedExecute;
    }
  }

  // --- helpers ----------------------------------------------------------------

  void mark(InflightInst& rec) {
    rec.marked = true;
    for (const RegRef& w : rec.instr->writes()) {
      ++scoreboard_[w.key()];
      if (mode_ == Mode::Sparce) mark_inflight(sprf_, w);
    }
    if (rec.instr->sets_flag()) ++flagWriters_;
  }

  // Commit retires the SpRF mark through svc_commit; only the scoreboard is
  // cleared here. The squash path clears both.
  void unmark_scoreboard(const InflightInst& rec) {
    if (!rec.marked) return;
    for (const RegRef& w : rec.instr->writes()) --scoreboard_[w.key()];
    if (rec.instr->sets_flag()) --flagWriters_;
  }

  void unmark_all(const InflightInst& rec) {
    if (!rec.marked) return;
    for (const RegRef& w : rec.instr->writes()) {
      --scoreboard_[w.key()];
      if (mode_ == Mode::Sparce) unmark_inflight(sprf_, w);
    }
    if (rec.instr->sets_flag()) --flagWriters_;
  }

  bool has_hazard(const InflightInst& rec) const {
    auto own_count = [&](const RegRef& r) {
      int n = 0;
      for (const RegRef& w : rec.instr->writes())
        if (w == r) ++n;
      return n;
    };
    for (const RegRef& r : rec.instr->reads())
      if (scoreboard_[r.key()] - own_count(r) > 0) return true;
    for (const RegRef& w : rec.instr->writes())
      if (scoreboard_[w.key()] - own_count(w) > 0) return true;
    if (rec.instr->reads_flag() && flagWriters_ > 0) return true;
    if (rec.instr->sets_flag() && flagWriters_ - 1 > 0) return true;
    return false;
  }

  void try_resolve_branch(InflightInst& rec) {
    const Instruction& inst = *rec.instr;
    if (inst.op != Opcode::B && flagWriters_ > 0) return;  // flag still in flight
    bool taken = false;
    switch (inst.op) {
      case Opcode::B: taken = true; break;
      case Opcode::BNE: taken = !state_.zeroFlag; break;
      case Opcode::BEQ: taken = state_.zeroFlag; break;
      default: return;
    }
    rec.resolvedBranch = true;
    rec.branchTaken = taken;
    if (taken) {
      redirect_ = inst.branchTarget;
      redirectSeq_ = rec.seq;
    }
  }

  void issue(InflightInst& rec) {
    const Instruction& inst = *rec.instr;
    int latency = cfg_.int_lat;
    if (inst.is_mem()) {
      MemAccessInfo info = mem_access_info(inst, state_);
      DCache::AccessResult r;
      try {
        r = cache_.access(info.addr, info.bytes);
      } catch (const std::exception& ex) {
        throw SimError(std::string("pc ") + std::to_string(rec.pc) + ": " + ex.what());
      }
      latency = (inst.op == Opcode::PRFM) ? cfg_.int_lat : r.latency;
    } else {
      switch (inst.op) {
        case Opcode::FMUL: latency = cfg_.fmul_lat; break;
        case Opcode::FADD: latency = cfg_.fadd_lat; break;
        case Opcode::FMLA: latency = cfg_.fmla_lat; break;
        case Opcode::VFMLA: latency = cfg_.vfmla_lat; break;
        default: latency = cfg_.int_lat; break;
      }
    }
    rec.remaining = std::max(latency, 1);
    ex_ = rec;
  }

  void squash(const InflightInst& rec) {
    unmark_all(rec);
    ++stats_.squashedInFlight;
    if (rec.instr->is_load() && rec.remaining == 0) ++stats_.loadsSkipped;  // pre-issue
    if (cfg_.collect_traces) trace_.squashedPcs.push_back(rec.pc);
  }

  bool region_in_flight() const {
    int id = pending_->id;
    auto tagged = [id](const std::optional<InflightInst>& s) {
      return s && s->regionTag == id;
    };
    return tagged(fe_) || tagged(de_) || tagged(ex_);
  }

  void clear_region_tags() {
    for (auto* slot : {&fe_, &de_, &ex_})
      if (*slot && (*slot)->regionTag == pending_->id) (*slot)->regionTag = -1;
  }

  void resolve_region_skip() {
    int id = pending_->id;
    for (auto* slot : {&fe_, &de_, &ex_}) {
      if (*slot && (*slot)->regionTag == id) {
        squash(**slot);
        slot->reset();
      }
    }
    if (nextFetchPC_ <= pending_->endPC) {
      count_skip_range(nextFetchPC_, pending_->endPC);
      nextFetchPC_ = pending_->endPC + 1;
    }
    ++stats_.regionsResolvedSkip;
    pending_.reset();
  }

  void count_skip_range(int first, int last) {
    if (first > last) return;
    stats_.skippedAtFetch += static_cast<uint64_t>(last - first + 1);
    for (int pc = first; pc <= last; ++pc) {
      const Instruction& inst = prog_.instructions[pc];
      if (inst.is_load()) ++stats_.loadsSkipped;
      if (cfg_.trap_nonfinite) check_finite(inst, pc);
    }
    if (cfg_.collect_traces) trace_.skipRanges.push_back({first, last});
  }

  void check_finite(const Instruction& inst, int pc) const {
    for (const RegRef& r : inst.reads()) {
      Value v = state_.read_reg(r);
      if (r.file == RegFile::Fp && !std::isfinite(v.v[0]))
        throw SimError("non-finite operand in skipped region at pc " + std::to_string(pc));
      if (r.file == RegFile::Vec)
        for (int k = 0; k < kVecLanes; ++k)
          if (!std::isfinite(v.v[k]))
            throw SimError("non-finite operand in skipped region at pc " + std::to_string(pc));
    }
  }

  void finalize_stats() {
    stats_.dcacheAccesses = cache_.stats().accesses;
    stats_.dcacheHits = cache_.stats().hits;
    stats_.dcacheMisses = cache_.stats().misses;
    assert(stats_.dcacheAccesses == stats_.dcacheHits + stats_.dcacheMisses);
    assert(stats_.fetched == stats_.executed + stats_.squashedInFlight);
    assert(stats_.cycles == stats_.busyIssueCycles + stats_.stallDataHazard +
                                stats_.stallExecBusy + stats_.stallMemWait +
                                stats_.frontendBubbles);
  }

  const Program& prog_;
  const SimConfig& cfg_;
  Mode mode_;
  MachineState state_;
  DCache cache_;
  SasaTable table_;
  Sprf sprf_;
  RunStats stats_;
  SimTrace trace_;

  std::optional<InflightInst> fe_, de_, ex_, wb_;
  std::array<int, 3 * kRegsPerFile> scoreboard_{};
  int flagWriters_{0};
  int nextFetchPC_{0};
  uint64_t fetchSeq_{0};
  uint64_t redirectSeq_{0};
  bool haltFetched_{false};
  std::optional<int> redirect_;
  int fetchStall_{0};
  std::optional<SkippableRegion> pending_;
  int nextRegionId_{1};
};

}  // namespace

SimResult simulate(const Program& prog, const MachineState& init, const SimConfig& cfg,
                   Mode mode) {
  if (prog.instructions.empty()) throw SimError("empty program");
  Pipeline p(prog, init, cfg, mode);
  return p.run();
}

}  // namespace sparce
