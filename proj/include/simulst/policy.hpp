#pragma once

// READ/WRITE decision procedures over pre-decision units: the fixed
// wait-k policy and a flexible multi-head stepwise-probability policy in
// the monotonic-attention family. Decisions are deterministic: a head
// halts at source unit j for target step i iff p(i, j) > 0.5 (no
// Bernoulli sampling), each head scans strictly forward from its previous
// halt, and a WRITE happens only once every head has halted within the
// units read so far (slowest-head rule).

#include "simulst/rational.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simulst {

struct PolicyContext {
  std::int64_t tokens_written = 0;  // i - 1
  std::int64_t units_read = 0;      // decision units consumed, g
  bool source_done = false;
  bool hypothesis_finished = false;
};

inline void check_policy_context(const PolicyContext& ctx) {
  if (ctx.tokens_written < 0 || ctx.units_read < 0)
    throw std::invalid_argument("malformed policy context");
  if (ctx.hypothesis_finished)
    throw std::logic_error("policy consulted after hypothesis finished");
}

enum class Action { read, write };

struct Decision {
  Action action = Action::read;
};

struct WaitKSpec {
  std::int64_t k = 1;  // >= 1
};

// Waits for k source units, then alternates one WRITE per READ; once the
// source is exhausted every decision is WRITE. The i-th token is written
// once g >= k + i - 1.
inline Decision waitk_decide(const PolicyContext& ctx, const WaitKSpec& spec) {
  check_policy_context(ctx);
  if (spec.k < 1) throw std::invalid_argument("wait-k requires k >= 1");
  if (ctx.source_done) return {Action::write};
  return {ctx.units_read - ctx.tokens_written >= spec.k ? Action::write : Action::read};
}

// A source of stepwise probabilities p(i, j) for the i-th target step and
// j-th source unit, in [0, 1].
struct StepwiseSource {
  std::string name;
  std::function<Rat(std::int64_t target_step, std::int64_t source_unit)> p;
};

// Wait-k as a stepwise source: p(i, j) = 1 iff j >= k + i - 1.
inline StepwiseSource stepwise_from_waitk(std::int64_t k) {
  if (k < 1) throw std::invalid_argument("stepwise_from_waitk requires k >= 1");
  return {"waitk:" + std::to_string(k),
          [k](std::int64_t i, std::int64_t j) { return j >= k + i - 1 ? Rat(1) : Rat(0); }};
}

// Externally computed head probabilities, keyed by (target step, source
// unit), with a default for missing entries.
inline StepwiseSource stepwise_from_table(std::map<std::pair<std::int64_t, std::int64_t>, Rat> table,
                                          Rat default_p) {
  if (default_p < Rat(0) || default_p > Rat(1))
    throw std::invalid_argument("default probability outside [0,1]");
  for (const auto& [key, p] : table)
    if (p < Rat(0) || p > Rat(1)) throw std::invalid_argument("stepwise probability outside [0,1]");
  auto shared = std::make_shared<std::map<std::pair<std::int64_t, std::int64_t>, Rat>>(std::move(table));
  return {"table", [shared, default_p](std::int64_t i, std::int64_t j) {
            auto it = shared->find({i, j});
            return it == shared->end() ? default_p : it->second;
          }};
}

struct MMASpec {
  std::vector<StepwiseSource> heads;  // at least one
};

struct MMAState {
  // Last source unit each head examined or halted at; non-decreasing
  // over a session (strict monotonic attention).
  std::vector<std::int64_t> head_positions;
  // Heads already halted for `target_step`; a halted head keeps its
  // position across re-consults of the same step while other heads catch
  // up.
  std::vector<bool> head_halted;
  std::int64_t target_step = 0;
};

// One decision for target step i = tokens_written + 1. Each head scans
// source units strictly after its previous position, advancing while
// p(i, j) <= 0.5 and j < units_read. If any head fails to halt within the
// read units and the source is not done, the decision is READ and the
// state records the head's progress; once the source is done unsatisfied
// heads are forced to halt at the final unit.
inline std::pair<Decision, MMAState> mma_decide(const PolicyContext& ctx, const MMASpec& spec,
                                                MMAState state) {
  check_policy_context(ctx);
  if (spec.heads.empty()) throw std::invalid_argument("MMA needs at least one head");
  if (state.head_positions.empty()) state.head_positions.assign(spec.heads.size(), 0);
  if (state.head_positions.size() != spec.heads.size())
    throw std::invalid_argument("MMA state does not match head count");

  const std::int64_t target_step = ctx.tokens_written + 1;
  if (state.target_step != target_step || state.head_halted.size() != spec.heads.size()) {
    state.target_step = target_step;
    state.head_halted.assign(spec.heads.size(), false);
  }

  const Rat half(1, 2);
  bool all_halted = true;
  for (std::size_t h = 0; h < spec.heads.size(); ++h) {
    if (state.head_halted[h]) continue;
    std::int64_t& pos = state.head_positions[h];
    std::int64_t j = pos + 1;
    bool halted = false;
    if (j <= ctx.units_read) {
      while (spec.heads[h].p(target_step, j) <= half && j < ctx.units_read) ++j;
      halted = spec.heads[h].p(target_step, j) > half;
      pos = j;  // progress: units up to j need no re-examination for this step
    }
    if (!halted && ctx.source_done) {
      pos = std::max(pos, ctx.units_read);  // forced halt at the final unit
      halted = true;
    }
    state.head_halted[h] = halted;
    if (!halted) all_halted = false;
  }
  if (all_halted || ctx.source_done) return {{Action::write}, std::move(state)};
  return {{Action::read}, std::move(state)};
}

}  // namespace simulst
