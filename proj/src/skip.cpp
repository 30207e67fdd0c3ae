#include "sparce/skip.hpp"

#include <stdexcept>

namespace sparce {

uint8_t svc_check(const Value& value, RegFile file) {
  switch (file) {
    case RegFile::Int:
      return value.i == 0 ? 0x1 : 0x0;
    case RegFile::Fp:
      return value.v[0] == 0.0f ? 0x1 : 0x0;  // +-0.0 compare equal to 0
    case RegFile::Vec: {
      uint8_t mask = 0;
      for (int k = 0; k < kVecLanes; ++k)
        if (value.v[k] == 0.0f) mask |= static_cast<uint8_t>(1 << k);
      return mask;
    }
  }
  return 0;
}

void mark_inflight(Sprf& sprf, const RegRef& reg) { ++sprf.entry(reg).regUpdInFlight; }

void unmark_inflight(Sprf& sprf, const RegRef& reg) {
  SprfEntry& e = sprf.entry(reg);
  if (e.regUpdInFlight <= 0)
    throw std::logic_error("unmark_inflight without a marked writer: " + reg_name(reg));
  --e.regUpdInFlight;
}

void svc_commit(Sprf& sprf, const RegRef& reg, const Value& value) {
  SprfEntry& e = sprf.entry(reg);
  if (e.regUpdInFlight <= 0)
    throw std::logic_error("svc_commit without a prior in-flight mark: " + reg_name(reg));
  e.isSparse = svc_check(value, reg.file);
  --e.regUpdInFlight;
}

Tri eval_condition(const SkipCondition& cond, const Sprf& sprf) {
  for (const CondTerm& t : cond.terms())
    if (sprf.in_flight(t.reg())) return Tri::Unknown;
  auto term_true = [&](const CondTerm& t) {
    uint8_t sparse = sprf.entry(t.reg()).isSparse;
    return (sparse & t.laneMask) == t.laneMask;
  };
  bool a = term_true(cond.term1);
  switch (cond.comb) {
    case Combiner::Single: return a ? Tri::True : Tri::False;
    case Combiner::Or: return (a || term_true(*cond.term2)) ? Tri::True : Tri::False;
    case Combiner::And: return (a && term_true(*cond.term2)) ? Tri::True : Tri::False;
  }
  return Tri::False;
}

const SasaEntry* SasaTable::lookup(int pc) const {
  auto it = byPc_.find(pc);
  return it == byPc_.end() ? nullptr : &it->second;
}

void SasaTable::load_entries(const std::vector<SasaEntry>& entries, int programLength) {
  if (static_cast<int>(entries.size()) > capacity_)
    throw std::runtime_error("SASA table overflow: " + std::to_string(entries.size()) +
                             " entries into capacity " + std::to_string(capacity_));
  std::map<int, SasaEntry> fresh;
  for (const auto& e : entries) {
    if (e.instsToSkip <= 0)
      throw std::runtime_error("malformed SASA entry: nonpositive instsToSkip");
    if (programLength >= 0 && e.precedingPC + e.instsToSkip >= programLength)
      throw std::runtime_error("SASA entry range exceeds program length");
    if (fresh.count(e.precedingPC))
      throw std::runtime_error("duplicate SASA entry for pc " + std::to_string(e.precedingPC));
    fresh[e.precedingPC] = e;
  }
  byPc_ = std::move(fresh);
}

void SasaTable::load(const Memory& memory, uint64_t baseAddr, int sizeEntries,
                     int programLength) {
  if (sizeEntries < 0 || sizeEntries > capacity_)
    throw std::runtime_error("SASALD size exceeds table capacity");
  std::vector<uint8_t> bytes(static_cast<size_t>(sizeEntries) * kSasaEntryBytes);
  memory.read(baseAddr, bytes.data(), bytes.size());
  load_entries(decode_sasa_entries(bytes.data(), sizeEntries), programLength);
}

PsruDecision psru_decide(int pc, const SasaTable& table, const Sprf& sprf,
                         const std::optional<SkippableRegion>& pending, int nextRegionId) {
  PsruDecision d;
  d.nextFetchPC = pc + 1;

  if (const SasaEntry* e = table.lookup(pc)) {
    d.sasaHit = true;
    Tri verdict = eval_condition(e->condition, sprf);
    if (verdict == Tri::True) {
      d.action = PsruDecision::Action::Skip;
      d.nextFetchPC = e->precedingPC + 1 + e->instsToSkip;
      d.region = SkippableRegion{nextRegionId, e->precedingPC + 1,
                                 e->precedingPC + e->instsToSkip, e->condition,
                                 SkippableRegion::Status::ResolvedSkip};
    } else if (verdict == Tri::Unknown) {
      d.action = PsruDecision::Action::EnterPending;
      d.region = SkippableRegion{nextRegionId, e->precedingPC + 1,
                                 e->precedingPC + e->instsToSkip, e->condition,
                                 SkippableRegion::Status::Pending};
    }
    return d;
  }

  if (pending && pc >= pending->startPC && pc <= pending->endPC) {
    Tri verdict = eval_condition(pending->condition, sprf);
    if (verdict == Tri::True) {
      d.action = PsruDecision::Action::ResolveSkip;
      d.nextFetchPC = pending->endPC + 1;
      d.region = *pending;
      d.region->status = SkippableRegion::Status::ResolvedSkip;
    } else if (verdict == Tri::False) {
      d.action = PsruDecision::Action::ResolveExecute;
      d.region = *pending;
      d.region->status = SkippableRegion::Status::ResolvedExecute;
    }
    return d;
  }

  return d;
}

}  // namespace sparce
