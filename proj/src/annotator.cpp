#include "sparce/annotator.hpp"

#include <algorithm>
#include <bitset>
#include <cassert>
#include <sstream>

namespace sparce {

namespace {

constexpr uint8_t kFullVecMask = 0xF;
constexpr uint8_t kScalarMask = 0x1;

uint8_t full_mask(RegFile f) { return f == RegFile::Vec ? kFullVecMask : kScalarMask; }

CondTerm full_term(const RegRef& r) { return CondTerm{r.file, r.index, full_mask(r.file)}; }
CondTerm lane_term(const RegRef& r, int lane) {
  return CondTerm{r.file, r.index, static_cast<uint8_t>(1 << lane)};
}

SkipCondition canonical(SkipCondition c) {
  if (c.term2 && *c.term2 < c.term1) std::swap(c.term1, *c.term2);
  return c;
}

// OR of two conditions in the 2-term language; nullopt when inexpressible.
std::optional<SkipCondition> cond_or(const SkipCondition& a, const SkipCondition& b) {
  if (a == b) return a;
  if (a.comb == Combiner::And || b.comb == Combiner::And) return std::nullopt;
  std::vector<CondTerm> terms;
  for (const auto& t : a.terms()) terms.push_back(t);
  for (const auto& t : b.terms())
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
  if (terms.size() == 1) return SkipCondition::single(terms[0]);
  if (terms.size() == 2) return canonical(SkipCondition{Combiner::Or, terms[0], terms[1]});
  return std::nullopt;
}

// AND; same-register terms merge by lane-mask union.
std::optional<SkipCondition> cond_and(const SkipCondition& a, const SkipCondition& b) {
  if (a == b) return a;
  if (a.comb == Combiner::Or || b.comb == Combiner::Or) return std::nullopt;
  std::vector<CondTerm> terms;
  auto add = [&](CondTerm t) {
    for (auto& u : terms) {
      if (u.file == t.file && u.regIndex == t.regIndex) {
        u.laneMask |= t.laneMask;
        return;
      }
    }
    terms.push_back(t);
  };
  for (const auto& t : a.terms()) add(t);
  for (const auto& t : b.terms()) add(t);
  if (terms.size() == 1) return SkipCondition::single(terms[0]);
  if (terms.size() == 2) return canonical(SkipCondition{Combiner::And, terms[0], terms[1]});
  return std::nullopt;
}

bool cond_references(const SkipCondition& c, const RegRef& r) {
  for (const auto& t : c.terms())
    if (t.reg() == r) return true;
  return false;
}

// --- CFG / liveness ------------------------------------------------------------

std::vector<int> successors(const Program& prog, int pc) {
  const Instruction& inst = prog.instructions[pc];
  if (inst.op == Opcode::HALT) return {};
  if (inst.op == Opcode::B) return {inst.branchTarget};
  std::vector<int> out;
  if (pc + 1 < static_cast<int>(prog.instructions.size())) out.push_back(pc + 1);
  if (inst.is_branch()) out.push_back(inst.branchTarget);
  return out;
}

std::vector<int> block_leaders(const Program& prog) {
  const int n = static_cast<int>(prog.instructions.size());
  std::set<int> leaders{0};
  for (int pc = 0; pc < n; ++pc) {
    const Instruction& inst = prog.instructions[pc];
    if (inst.is_branch()) {
      leaders.insert(inst.branchTarget);
      if (pc + 1 < n) leaders.insert(pc + 1);
    }
  }
  return {leaders.begin(), leaders.end()};
}

using RegSet = std::bitset<3 * kRegsPerFile>;

// liveOut[pc]: registers live immediately after pc.
std::vector<RegSet> live_out_sets(const Program& prog) {
  const int n = static_cast<int>(prog.instructions.size());
  std::vector<RegSet> liveIn(n), liveOut(n);
  std::vector<RegSet> use(n), def(n);
  for (int pc = 0; pc < n; ++pc) {
    for (const RegRef& r : prog.instructions[pc].reads()) use[pc].set(r.key());
    for (const RegRef& r : prog.instructions[pc].writes()) def[pc].set(r.key());
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pc = n - 1; pc >= 0; --pc) {
      RegSet out;
      for (int s : successors(prog, pc)) out |= liveIn[s];
      RegSet in = use[pc] | (out & ~def[pc]);
      if (out != liveOut[pc] || in != liveIn[pc]) {
        liveOut[pc] = out;
        liveIn[pc] = in;
        changed = true;
      }
    }
  }
  return liveOut;
}

// --- zero facts ------------------------------------------------------------------

struct RegFacts {
  std::optional<SkipCondition> full;                       // all words zero
  std::array<std::optional<SkipCondition>, kVecLanes> lane;
};

struct BlockAnalysis {
  std::map<int, SkipCondition> noop;  // pc -> no-op condition (R1 family)
  std::set<int> noopOverBudget;
};

bool writes_reg(const Instruction& inst, const RegRef& r) {
  for (const RegRef& w : inst.writes())
    if (w == r) return true;
  return false;
}

bool reads_reg(const Instruction& inst, const RegRef& r) {
  for (const RegRef& u : inst.reads())
    if (u == r) return true;
  return false;
}

}  // namespace

// True iff the conjunction of `premises` implies `conclusion`, by enumerating
// the per-lane atoms the conditions reference.
static bool implies_all(const std::vector<SkipCondition>& premises,
                        const SkipCondition& conclusion) {
  std::vector<std::pair<int, int>> atoms;
  auto atom_index = [&](int key, int lane) {
    for (size_t i = 0; i < atoms.size(); ++i)
      if (atoms[i] == std::make_pair(key, lane)) return static_cast<int>(i);
    atoms.push_back({key, lane});
    return static_cast<int>(atoms.size() - 1);
  };
  auto collect = [&](const SkipCondition& c) {
    for (const auto& t : c.terms())
      for (int k = 0; k < kVecLanes; ++k)
        if (t.laneMask & (1 << k)) atom_index(t.reg().key(), k);
  };
  for (const auto& p : premises) collect(p);
  collect(conclusion);
  if (atoms.size() > 20) return false;  // give up, conservatively
  auto eval = [&](const SkipCondition& c, uint32_t assignment) {
    auto term_true = [&](const CondTerm& t) {
      for (int k = 0; k < kVecLanes; ++k) {
        if (!(t.laneMask & (1 << k))) continue;
        int idx = atom_index(t.reg().key(), k);
        if (!(assignment & (1u << idx))) return false;
      }
      return true;
    };
    bool first = term_true(c.term1);
    switch (c.comb) {
      case Combiner::Single: return first;
      case Combiner::Or: return first || term_true(*c.term2);
      case Combiner::And: return first && term_true(*c.term2);
    }
    return false;
  };
  const uint32_t limit = 1u << atoms.size();
  for (uint32_t assignment = 0; assignment < limit; ++assignment) {
    bool all = true;
    for (const auto& p : premises)
      if (!eval(p, assignment)) { all = false; break; }
    if (all && !eval(conclusion, assignment)) return false;
  }
  return true;
}

bool cond_implies(const SkipCondition& a, const SkipCondition& b) {
  return implies_all({a}, b);
}

std::vector<Seed> find_seeds(const Program& prog, const std::vector<SparseMarker>& markers) {
  std::vector<Seed> seeds;
  for (const auto& m : markers) {
    int pc;
    if (std::holds_alternative<int>(m.target)) {
      pc = std::get<int>(m.target);
      if (pc < 0 || pc >= static_cast<int>(prog.instructions.size()))
        throw AnnotatorError("sparse marker pc out of range: " + std::to_string(pc));
    } else {
      const std::string& label = std::get<std::string>(m.target);
      auto it = prog.labels.find(label);
      if (it == prog.labels.end())
        throw AnnotatorError("sparse marker names unknown label: " + label);
      pc = it->second;
    }
    const Instruction& inst = prog.instructions[pc];
    if (!inst.is_load())
      throw AnnotatorError("sparse marker at pc " + std::to_string(pc) +
                           " names a non-load instruction");
    Seed s;
    s.loadPc = pc;
    s.destReg = *inst.dst;
    s.perLane = (inst.dst->file == RegFile::Vec) &&
                (m.granularity == SparseMarker::Granularity::PerLane);
    seeds.push_back(s);
  }
  std::sort(seeds.begin(), seeds.end(),
            [](const Seed& a, const Seed& b) { return a.loadPc < b.loadPc; });
  seeds.erase(std::unique(seeds.begin(), seeds.end(),
                          [](const Seed& a, const Seed& b) { return a.loadPc == b.loadPc; }),
              seeds.end());
  return seeds;
}

RedundancyMap propagate(const Program& prog, const std::vector<Seed>& seeds) {
  RedundancyMap rmap;
  if (seeds.empty()) return rmap;
  const int n = static_cast<int>(prog.instructions.size());

  std::map<int, const Seed*> seedAt;
  for (const auto& s : seeds) seedAt[s.loadPc] = &s;

  // Registers whose every writer in the program is a marked load carry the
  // sparse structure everywhere; conditions on them are valid at block entry.
  std::map<int, const Seed*> sparseQualified;  // reg key -> one of its seeds
  {
    std::set<int> seedRegs;
    for (const auto& s : seeds) seedRegs.insert(s.destReg.key());
    for (int key : seedRegs) {
      RegRef r = RegRef::from_key(key);
      bool allMarked = true;
      const Seed* sample = nullptr;
      for (int pc = 0; pc < n; ++pc) {
        if (!writes_reg(prog.instructions[pc], r)) continue;
        auto it = seedAt.find(pc);
        if (it == seedAt.end() || !(it->second->destReg == r)) {
          allMarked = false;
          break;
        }
        sample = it->second;
      }
      if (allMarked && sample) sparseQualified[key] = sample;
    }
  }

  std::vector<RegSet> liveOut = live_out_sets(prog);
  std::vector<int> leaders = block_leaders(prog);

  for (size_t b = 0; b < leaders.size(); ++b) {
    int start = leaders[b];
    int end = (b + 1 < leaders.size()) ? leaders[b + 1] : n;  // [start, end)

    // forward zero-fact pass
    std::map<int, RegFacts> facts;
    for (const auto& [key, seed] : sparseQualified) {
      RegRef r = RegRef::from_key(key);
      RegFacts f;
      f.full = SkipCondition::single(full_term(r));
      if (seed->perLane)
        for (int k = 0; k < kVecLanes; ++k)
          f.lane[k] = SkipCondition::single(lane_term(r, k));
      facts[key] = f;
    }

    BlockAnalysis ba;
    auto full_fact = [&](const RegRef& r) -> std::optional<SkipCondition> {
      auto it = facts.find(r.key());
      return it == facts.end() ? std::nullopt : it->second.full;
    };
    auto lane_fact = [&](const RegRef& r, int lane) -> std::optional<SkipCondition> {
      auto it = facts.find(r.key());
      return it == facts.end() ? std::nullopt : it->second.lane[lane];
    };

    for (int pc = start; pc < end; ++pc) {
      const Instruction& inst = prog.instructions[pc];

      // no-op condition before this instruction's own writes take effect
      std::optional<SkipCondition> noop;
      bool noopOver = false;
      auto or_into = [&](const std::optional<SkipCondition>& c) {
        if (!c) return;
        if (!noop) { noop = c; return; }
        auto merged = cond_or(*noop, *c);
        if (merged) noop = merged;
        else noopOver = true;  // keep the first justification, note the overflow
      };
      switch (inst.op) {
        case Opcode::FMLA:
          or_into(full_fact(inst.srcs[0].reg));
          or_into(full_fact(inst.srcs[1].reg));
          break;
        case Opcode::VFMLA:
          or_into(full_fact(inst.srcs[0].reg));
          or_into(lane_fact(inst.srcs[1].reg, inst.srcs[1].lane));
          break;
        case Opcode::FADD: {
          // accumulator form only: dst must alias one source
          const RegRef a = inst.srcs[0].reg, b = inst.srcs[1].reg;
          if (*inst.dst == a) or_into(full_fact(b));
          else if (*inst.dst == b) or_into(full_fact(a));
          break;
        }
        default:
          break;
      }
      if (noop) {
        rmap.cond[pc] = canonical(*noop);
        rmap.provenance[pc] = "R1";
      }
      if (noopOver) rmap.overBudget.insert(pc);

      // update facts: derive the new one from the pre-write state first
      std::optional<RegFacts> produced;
      RegRef producedReg{};
      if (auto it = seedAt.find(pc); it != seedAt.end()) {
        const Seed& s = *it->second;
        RegFacts f;
        f.full = SkipCondition::single(full_term(s.destReg));
        if (s.perLane)
          for (int k = 0; k < kVecLanes; ++k)
            f.lane[k] = SkipCondition::single(lane_term(s.destReg, k));
        produced = f;
        producedReg = s.destReg;
      } else if (inst.op == Opcode::FMUL) {
        auto a = full_fact(inst.srcs[0].reg), b = full_fact(inst.srcs[1].reg);
        std::optional<SkipCondition> prod;
        if (a && b) prod = cond_or(*a, *b);
        else if (a) prod = a;
        else if (b) prod = b;
        if (prod) {
          RegFacts f;
          f.full = canonical(*prod);
          produced = f;
          producedReg = *inst.dst;
        }
      } else if (inst.op == Opcode::FADD && full_fact(inst.srcs[0].reg) &&
                 full_fact(inst.srcs[1].reg)) {
        if (auto sum = cond_and(*full_fact(inst.srcs[0].reg), *full_fact(inst.srcs[1].reg))) {
          RegFacts f;
          f.full = canonical(*sum);
          produced = f;
          producedReg = *inst.dst;
        }
      }
      // every write kills the written register's facts and any derived fact
      // whose condition mentions it (the condition would now test a value the
      // derivation never saw)
      for (const RegRef& w : inst.writes()) {
        facts.erase(w.key());
        for (auto it = facts.begin(); it != facts.end();) {
          auto& rf = it->second;
          auto refs = [&](const std::optional<SkipCondition>& c) {
            return c && cond_references(*c, w);
          };
          if (refs(rf.full)) rf.full.reset();
          for (auto& lf : rf.lane)
            if (refs(lf)) lf.reset();
          bool any = rf.full.has_value();
          for (const auto& lf : rf.lane) any = any || lf.has_value();
          it = any ? std::next(it) : facts.erase(it);
        }
      }
      if (produced) facts[producedReg.key()] = *produced;
    }

    // R2: dead-write inheritance. A later redefinition of the destination
    // kills the value only if the redefining instruction is certain to
    // execute; a skippable redefiner is a conditional kill, so the scan
    // continues and every reader beyond it must be skipped whenever all the
    // passed redefiners were (otherwise the stale value escapes). Because a
    // kill's classification depends on the current map, every candidate is
    // re-derived until the map is stable.
    auto derive_r2 = [&](int pc, const std::map<int, SkipCondition>& current,
                         bool* overBudget) -> std::optional<SkipCondition> {
      const Instruction& inst = prog.instructions[pc];
      if (!inst.dst) return std::nullopt;
      if (inst.is_store() || inst.is_branch() || inst.sets_flag() ||
          inst.has_post_increment() || inst.op == Opcode::SASALD ||
          inst.op == Opcode::PRFM || inst.op == Opcode::HALT)
        return std::nullopt;
      const RegRef d = *inst.dst;

      std::vector<int> uses;
      std::vector<SkipCondition> passedKills;
      bool definiteKill = false;
      int lastUse = pc;
      for (int j = pc + 1; j < end; ++j) {
        const Instruction& ij = prog.instructions[j];
        if (reads_reg(ij, d)) {
          auto it = current.find(j);
          if (passedKills.empty()) {
            if (it == current.end()) return std::nullopt;  // live use, not skippable
            uses.push_back(j);
            lastUse = j;
          } else {
            // reachable with the stale value only when all passed kills were
            // skipped; then this reader must be skipped too
            if (it == current.end() || !implies_all(passedKills, it->second))
              return std::nullopt;
          }
        }
        if (writes_reg(ij, d)) {
          auto it = current.find(j);
          if (it == current.end()) { definiteKill = true; break; }
          passedKills.push_back(it->second);
        }
      }
      if (!definiteKill && liveOut[end - 1].test(d.key()))
        return std::nullopt;  // the value (or a stale copy) survives the block
      if (uses.empty()) return std::nullopt;  // plain dead code is not a sparsity skip

      std::optional<SkipCondition> inherited;
      for (int usePc : uses) {
        const SkipCondition& uc = current.at(usePc);
        if (!inherited) inherited = uc;
        else {
          auto merged = cond_and(*inherited, uc);
          if (!merged) {
            if (overBudget) *overBudget = true;
            return std::nullopt;
          }
          inherited = merged;
        }
      }
      // staleness guards: never condition on the value this write replaces.
      // An OR may drop the self-term (the survivor still implies the use
      // condition); a SINGLE or AND referencing it cannot be repaired.
      if (cond_references(*inherited, d)) {
        if (inherited->comb != Combiner::Or) return std::nullopt;
        bool t1self = inherited->term1.reg() == d;
        bool t2self = inherited->term2->reg() == d;
        if (t1self == t2self) return std::nullopt;
        inherited = SkipCondition::single(t1self ? *inherited->term2 : inherited->term1);
      }
      // condition registers must be stable from the candidate to its last use
      for (const auto& t : inherited->terms())
        for (int k = pc + 1; k <= lastUse; ++k)
          if (writes_reg(prog.instructions[k], t.reg())) return std::nullopt;
      return canonical(*inherited);
    };

    std::map<int, SkipCondition> r1Layer;
    for (int pc = start; pc < end; ++pc)
      if (rmap.cond.count(pc)) r1Layer[pc] = rmap.cond[pc];

    std::map<int, SkipCondition> current = r1Layer;
    bool stable = false;
    for (int round = 0; round < 64 && !stable; ++round) {
      std::map<int, SkipCondition> next = r1Layer;
      for (int pc = end - 1; pc >= start; --pc) {
        if (next.count(pc)) continue;
        if (auto c = derive_r2(pc, current, nullptr)) next[pc] = *c;
      }
      stable = (next == current);
      current = std::move(next);
    }
    if (!stable) current = r1Layer;  // no fixpoint: keep only the no-op layer

    for (const auto& [pc, c] : current) {
      if (rmap.cond.count(pc)) continue;
      rmap.cond[pc] = c;
      rmap.provenance[pc] = "R2";
    }
    // note candidates whose only obstacle was the two-term budget
    for (int pc = start; pc < end; ++pc) {
      if (current.count(pc)) continue;
      bool over = false;
      derive_r2(pc, current, &over);
      if (over) rmap.overBudget.insert(pc);
    }
  }
  return rmap;
}

RegionResult form_regions(const Program& prog, const RedundancyMap& rmap) {
  RegionResult res;
  const int n = static_cast<int>(prog.instructions.size());

  for (int pc : rmap.overBudget)
    res.warnings.push_back({AnnotatorWarning::Kind::TermBudget, pc,
                            "condition needs more than 2 terms; instruction left unskipped"});

  // maximal runs of consecutive PCs with identical conditions
  std::vector<std::pair<int, int>> runs;  // [first, last]
  std::vector<SkipCondition> runConds;
  for (auto it = rmap.cond.begin(); it != rmap.cond.end(); ++it) {
    if (!runs.empty() && it->first == runs.back().second + 1 &&
        it->second == runConds.back()) {
      runs.back().second = it->first;
      continue;
    }
    runs.push_back({it->first, it->first});
    runConds.push_back(it->second);
  }

  std::vector<int> leaders = block_leaders(prog);
  auto block_start = [&](int pc) {
    int s = 0;
    for (int l : leaders)
      if (l <= pc) s = l;
    return s;
  };

  for (size_t i = 0; i < runs.size(); ++i) {
    auto [first, last] = runs[i];
    const SkipCondition& cond = runConds[i];
    if (first == 0) {
      res.warnings.push_back({AnnotatorWarning::Kind::NoPrecedingPC, first,
                              "skippable run starts at pc 0; no preceding pc exists"});
      continue;
    }
    int preceding = first - 1;
    const Instruction& anchor = prog.instructions[preceding];
    if (anchor.is_branch() || anchor.op == Opcode::HALT || anchor.op == Opcode::SASALD) {
      res.warnings.push_back({AnnotatorWarning::Kind::BadAnchor, preceding,
                              "preceding pc is a control transfer; entry dropped"});
      continue;
    }
    // the condition must be stable from the anchor's fetch to the region end
    bool writesCond = false;
    for (int pc = preceding; pc <= last && !writesCond; ++pc)
      for (const auto& t : cond.terms())
        if (writes_reg(prog.instructions[pc], t.reg())) writesCond = true;
    if (writesCond) {
      res.warnings.push_back({AnnotatorWarning::Kind::CondWrittenInRegion, preceding,
                              "region writes one of its condition registers; entry dropped"});
      continue;
    }
    // R3
    bool unsound = false;
    for (const auto& t : cond.terms()) {
      for (const auto& [wpc, wcond] : rmap.cond) {
        if (wpc >= first && wpc <= last) continue;  // same region skips atomically
        if (!writes_reg(prog.instructions[wpc], t.reg())) continue;
        if (!cond_implies(wcond, cond)) {
          std::ostringstream msg;
          msg << "condition references " << reg_name(t.reg()) << " written by skippable pc "
              << wpc << " whose condition does not imply it; entry dropped";
          res.warnings.push_back({AnnotatorWarning::Kind::UnsoundDropped, first, msg.str()});
          unsound = true;
          break;
        }
      }
      if (unsound) break;
    }
    if (unsound) continue;
    // spacing: producer of each condition register vs. the anchor
    int bstart = block_start(first);
    for (const auto& t : cond.terms()) {
      for (int pc = preceding - 1; pc >= bstart; --pc) {
        if (writes_reg(prog.instructions[pc], t.reg())) {
          if (preceding - pc < 3) {
            std::ostringstream msg;
            msg << reg_name(t.reg()) << " is produced " << (preceding - pc)
                << " instruction(s) before the anchor; first pass may squash instead of skip";
            res.warnings.push_back({AnnotatorWarning::Kind::Spacing, first, msg.str()});
          }
          break;
        }
      }
    }
    res.entries.push_back(SasaEntry{preceding, cond, last - first + 1});
  }

  for (size_t i = 1; i < res.entries.size(); ++i) {
    const auto& prev = res.entries[i - 1];
    if (res.entries[i].precedingPC + 1 <= prev.precedingPC + prev.instsToSkip)
      throw AnnotatorError("internal error: overlapping regions");
  }
  (void)n;
  return res;
}

AnnotateResult annotate(const Program& prog, const std::vector<SparseMarker>& markers,
                        const AnnotateOptions& opts) {
  AnnotateResult result;
  auto seeds = find_seeds(prog, markers);
  RedundancyMap rmap = propagate(prog, seeds);
  RegionResult regions = form_regions(prog, rmap);
  result.warnings = regions.warnings;
  if (regions.entries.empty()) {
    result.program = prog;
    return result;
  }

  const int n = static_cast<int>(prog.instructions.size());

  // scratch integer register for the table address
  std::array<bool, kRegsPerFile> used{};
  for (const auto& inst : prog.instructions) {
    for (const RegRef& r : inst.reads())
      if (r.file == RegFile::Int) used[r.index] = true;
    for (const RegRef& r : inst.writes())
      if (r.file == RegFile::Int) used[r.index] = true;
  }
  int scratch = -1;
  for (int i = kRegsPerFile - 1; i >= 0; --i)
    if (!used[i]) { scratch = i; break; }
  if (scratch < 0) throw AnnotatorError("no free integer register for the SASALD prologue");

  auto capacity_error = [&](const std::vector<SasaEntry>& entries) {
    std::vector<SasaEntry> byBenefit = entries;
    std::stable_sort(byBenefit.begin(), byBenefit.end(),
                     [](const SasaEntry& a, const SasaEntry& b) {
                       return a.instsToSkip > b.instsToSkip;
                     });
    std::ostringstream msg;
    msg << "SASA capacity exceeded: " << entries.size() << " entries > capacity "
        << opts.capacity << "; entries dropped (by benefit, region length descending):";
    for (size_t i = opts.capacity; i < byBenefit.size(); ++i)
      msg << " {pc=" << byBenefit[i].precedingPC
          << ", len=" << byBenefit[i].instsToSkip << "}";
    msg << "; raise --capacity or use per-label table refresh";
    throw CapacityError(msg.str());
  };

  // group entries by insertion point
  struct Group {
    int insertAt;
    std::vector<SasaEntry> entries;
  };
  std::vector<Group> groups;
  if (!opts.refreshAtLabels) {
    if (static_cast<int>(regions.entries.size()) > opts.capacity)
      capacity_error(regions.entries);
    groups.push_back({0, regions.entries});
  } else {
    std::vector<int> labelPcs;
    for (const auto& [name, pc] : prog.labels) labelPcs.push_back(pc);
    std::sort(labelPcs.begin(), labelPcs.end());
    labelPcs.erase(std::unique(labelPcs.begin(), labelPcs.end()), labelPcs.end());
    auto segment_start = [&](int pc) {
      int s = 0;
      for (int l : labelPcs)
        if (l <= pc) s = l;
      return s;
    };
    for (const auto& e : regions.entries) {
      int seg = segment_start(e.precedingPC);
      if (!groups.empty() && groups.back().insertAt == seg)
        groups.back().entries.push_back(e);
      else
        groups.push_back({seg, {e}});
    }
    // merge consecutive groups while they fit: one load covers them all
    std::vector<Group> merged;
    for (auto& g : groups) {
      if (!merged.empty() &&
          merged.back().entries.size() + g.entries.size() <=
              static_cast<size_t>(opts.capacity)) {
        merged.back().entries.insert(merged.back().entries.end(), g.entries.begin(),
                                     g.entries.end());
      } else {
        merged.push_back(std::move(g));
      }
    }
    groups = std::move(merged);
    for (const auto& g : groups)
      if (static_cast<int>(g.entries.size()) > opts.capacity) capacity_error(g.entries);
  }

  // old pc -> new pc, with 2 instructions inserted before each group point
  std::vector<int> insertAts;
  for (const auto& g : groups) insertAts.push_back(g.insertAt);
  auto old_to_new = [&](int pc) {
    int shift = 0;
    for (int at : insertAts)
      if (at <= pc) shift += 2;
    return pc + shift;
  };

  Program out;
  out.data = prog.data;
  out.sasaBlocks = prog.sasaBlocks;  // pre-existing blocks carried over

  // allocate payload addresses after any existing blocks
  uint64_t next = 0xE00000;
  for (const auto& b : out.sasaBlocks)
    next = std::max(next, (b.addr + b.entries.size() * kSasaEntryBytes + 63) & ~uint64_t{63});

  std::vector<std::pair<std::string, int>> groupBlocks;  // name, entry count
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    SasaBlock block;
    block.name = "__sasa_" + std::to_string(gi);
    block.addr = next;
    for (auto e : groups[gi].entries) {
      int startNew = old_to_new(e.precedingPC + 1);
      int endNew = old_to_new(e.precedingPC + e.instsToSkip);
      if (endNew - startNew != e.instsToSkip - 1)
        throw AnnotatorError("internal error: table load inserted inside a region");
      e.precedingPC = old_to_new(e.precedingPC);
      // the anchor must sit directly before the (shifted) region
      if (e.precedingPC + 1 != startNew)
        throw AnnotatorError("internal error: region separated from its anchor");
      block.entries.push_back(e);
      result.entries.push_back(e);
    }
    next = (next + block.entries.size() * kSasaEntryBytes + 63) & ~uint64_t{63};
    groupBlocks.push_back({block.name, static_cast<int>(block.entries.size())});
    out.sasaBlocks.push_back(std::move(block));
  }

  // rebuild the instruction stream
  size_t gi = 0;
  RegRef scratchReg{RegFile::Int, scratch};
  for (int pc = 0; pc <= n; ++pc) {
    while (gi < groups.size() && groups[gi].insertAt == pc) {
      const auto& [name, count] = groupBlocks[gi];
      Instruction mov;
      mov.op = Opcode::MOV;
      mov.dst = scratchReg;
      Operand sym;
      sym.kind = Operand::Kind::Symbol;
      sym.symbol = name;
      sym.imm = static_cast<int64_t>(*[&] {
        for (const auto& b : out.sasaBlocks)
          if (b.name == name) return std::optional<uint64_t>(b.addr);
        return std::optional<uint64_t>{};
      }());
      mov.srcs.push_back(sym);
      out.instructions.push_back(mov);

      Instruction ld;
      ld.op = Opcode::SASALD;
      ld.srcs.push_back(Operand::make_mem(scratchReg));
      ld.srcs.push_back(Operand::make_imm(count));
      out.instructions.push_back(ld);
      ++gi;
      ++result.tableLoads;
    }
    if (pc < n) out.instructions.push_back(prog.instructions[pc]);
  }
  for (auto& inst : out.instructions)
    if (inst.is_branch()) inst.branchTarget = old_to_new(inst.branchTarget);
  for (const auto& [name, pc] : prog.labels) out.labels[name] = old_to_new(pc);

  result.program = std::move(out);
  return result;
}

}  // namespace sparce
