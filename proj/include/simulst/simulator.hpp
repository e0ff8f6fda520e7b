#pragma once

// Session orchestration: streams frames under a simulated clock with
// computation costs, fires pre-decision triggers, consults the policy,
// invokes an agent for tokens, and records the Trace with CA and NCA
// delays.
//
// The CA clock has two components that add: speech availability
// (frames_read * T_s, a barrier that never moves backwards) and an
// accumulated computation cost. Encoder cost is charged per new state in
// incremental mode; in recompute mode the whole prefix is re-encoded at
// each decision point, so the charge is cost_per_state * (states so far)
// once per fired trigger. Policy consult cost is charged per decision,
// READ decisions included, and agent invocations charge cost_per_token.
// A wall-clock mode substitutes measured host time for the modeled costs
// (profiling only; everything else uses the deterministic model).

#include "simulst/bleu.hpp"
#include "simulst/latency.hpp"
#include "simulst/policy.hpp"
#include "simulst/pre_decision.hpp"
#include "simulst/rational.hpp"
#include "simulst/stream.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

namespace simulst {

enum class EncoderMode { incremental, recompute };

struct CostModel {
  EncoderMode encoder_mode = EncoderMode::incremental;
  Rat cost_per_state_ms{0};
  Rat cost_per_decision_ms{0};
  Rat cost_per_token_ms{0};
  // Profiling mode: CA delays use measured host time instead of the
  // modeled costs above. Not deterministic; evaluation uses the model.
  bool wall_clock = false;
};

inline void check_cost_model(const CostModel& costs) {
  if (costs.cost_per_state_ms < Rat(0) || costs.cost_per_decision_ms < Rat(0) ||
      costs.cost_per_token_ms < Rat(0))
    throw std::invalid_argument("cost model entries must be >= 0");
  if (costs.wall_clock &&
      (costs.cost_per_state_ms != Rat(0) || costs.cost_per_decision_ms != Rat(0) ||
       costs.cost_per_token_ms != Rat(0)))
    throw std::invalid_argument("wall-clock mode takes no cost entries");
}

inline std::string to_string(const CostModel& costs) {
  if (costs.wall_clock) return "wall";
  return std::string(costs.encoder_mode == EncoderMode::incremental ? "incremental" : "recompute") +
         ":" + format_fixed(costs.cost_per_state_ms) + "," + format_fixed(costs.cost_per_decision_ms) +
         "," + format_fixed(costs.cost_per_token_ms);
}

struct SimClock {
  Rat speech_ms{0};   // latest frame availability barrier
  Rat compute_ms{0};  // accumulated computation

  void observe_frame(std::int64_t frame_index, const Rat& frame_period_ms) {
    Rat barrier = frame_period_ms * frame_index;
    if (barrier > speech_ms) speech_ms = barrier;
  }
  void add_compute(const Rat& cost) { compute_ms += cost; }
  Rat now_ms() const { return speech_ms + compute_ms; }
};

struct AgentContext {
  const SourceStream& stream;  // features available up to frames_read
  std::int64_t frames_read = 0;
  std::int64_t units_read = 0;
  const std::vector<std::string>& tokens;
};

class Agent {
 public:
  virtual ~Agent() = default;
  // Returns the next target token, or nullopt for END. Must be
  // deterministic given the context.
  virtual std::optional<std::string> next_token(const AgentContext& ctx) = 0;
};

// Emits the reference tokens in order, then END.
class OracleAgent : public Agent {
 public:
  explicit OracleAgent(std::vector<std::string> reference) : reference_(std::move(reference)) {
    if (reference_.empty()) throw std::invalid_argument("oracle agent needs a non-empty reference");
  }

  std::optional<std::string> next_token(const AgentContext&) override {
    if (position_ < reference_.size()) return reference_[position_++];
    if (!end_emitted_) {
      end_emitted_ = true;
      return std::nullopt;
    }
    throw std::logic_error("oracle agent consulted after END");
  }

 private:
  std::vector<std::string> reference_;
  std::size_t position_ = 0;
  bool end_emitted_ = false;
};

// Emits reference token i only once proportional source coverage is
// reached (frames_read >= ceil((i / |ref|) * num_frames)), a placeholder
// otherwise; this makes BLEU a monotone function of how much source each
// token waited for.
class CoverageOracleAgent : public Agent {
 public:
  CoverageOracleAgent(std::vector<std::string> reference, std::int64_t num_frames,
                      std::string placeholder)
      : reference_(std::move(reference)),
        num_frames_(num_frames),
        placeholder_(std::move(placeholder)) {
    if (reference_.empty()) throw std::invalid_argument("coverage agent needs a non-empty reference");
    if (num_frames_ < 1) throw std::invalid_argument("coverage agent needs num_frames >= 1");
  }

  std::optional<std::string> next_token(const AgentContext& ctx) override {
    if (position_ >= reference_.size()) {
      if (!end_emitted_) {
        end_emitted_ = true;
        return std::nullopt;
      }
      throw std::logic_error("coverage agent consulted after END");
    }
    std::int64_t i = static_cast<std::int64_t>(position_) + 1;
    std::int64_t ref_len = static_cast<std::int64_t>(reference_.size());
    std::int64_t needed = (i * num_frames_ + ref_len - 1) / ref_len;  // ceil(i/|ref| * |X|)
    const std::string& token = ctx.frames_read >= needed ? reference_[position_] : placeholder_;
    ++position_;
    return token;
  }

 private:
  std::vector<std::string> reference_;
  std::int64_t num_frames_;
  std::string placeholder_;
  std::size_t position_ = 0;
  bool end_emitted_ = false;
};

inline std::shared_ptr<Agent> oracle_agent(std::vector<std::string> reference) {
  return std::make_shared<OracleAgent>(std::move(reference));
}

inline std::shared_ptr<Agent> coverage_oracle_agent(std::vector<std::string> reference,
                                                    std::int64_t num_frames, std::string placeholder) {
  return std::make_shared<CoverageOracleAgent>(std::move(reference), num_frames,
                                               std::move(placeholder));
}

using PreDecision = std::variant<FixedPreDecision, AlignmentTable>;
using PolicySpec = std::variant<WaitKSpec, MMASpec>;

inline TriggerDecision pd_trigger(const FixedPreDecision& pd, std::int64_t state_index) {
  return fixed_trigger(state_index, pd);
}

inline TriggerDecision pd_trigger(const AlignmentTable& pd, std::int64_t state_index) {
  return flexible_trigger(state_index, pd);
}

struct SessionConfig {
  PreDecision pre_decision{AlignmentTable{}};
  PolicySpec policy;
  std::shared_ptr<Agent> agent;
  CostModel cost_model;
  std::int64_t subsample_factor = 4;  // r_e
  std::int64_t max_tokens = 4096;     // safety cap
  TraceConfig descriptor;
};

inline Trace run_session(const SourceStream& stream, const SessionConfig& config) {
  auto stream_violations = validate_stream(stream);
  if (!stream_violations.empty()) throw std::invalid_argument(stream_violations.front());
  if (config.max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  if (!config.agent) throw std::invalid_argument("session needs an agent");
  if (config.subsample_factor < 1) throw std::invalid_argument("subsample_factor must be >= 1");
  check_cost_model(config.cost_model);

  const Rat& period = stream.frame_period_ms;
  const std::int64_t r_e = config.subsample_factor;
  if (const auto* fixed = std::get_if<FixedPreDecision>(&config.pre_decision)) {
    if (fixed->frame_period_ms() != period)
      throw std::invalid_argument("stream " + stream.id +
                                  ": fixed pre-decision frame period does not match the stream");
    if (fixed->subsample_factor() != r_e)
      throw std::invalid_argument("stream " + stream.id +
                                  ": fixed pre-decision subsample factor does not match the session");
  } else {
    const auto& table = std::get<AlignmentTable>(config.pre_decision);
    if (table.num_states() != encoder_state_count(stream.num_frames, r_e))
      throw std::invalid_argument("stream " + stream.id +
                                  ": alignment table state count does not match the stream");
  }

  Trace trace;
  trace.stream_id = stream.id;
  trace.num_frames = stream.num_frames;
  trace.frame_period_ms = period;
  trace.config = config.descriptor;

  SimClock clock;
  Hypothesis hyp;
  EncoderStateSeq encoder{r_e, 0};
  std::int64_t frames_read = 0;
  std::int64_t units_read = 0;
  std::int64_t states_since_trigger = 0;
  bool source_done = false;
  bool capped = false;
  MMAState mma_state;
  const CostModel& costs = config.cost_model;
  const bool recompute = costs.encoder_mode == EncoderMode::recompute;
  const auto wall_start = std::chrono::steady_clock::now();

  auto ca_now = [&]() -> Rat {
    if (!costs.wall_clock) return clock.now_ms();
    auto elapsed =
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                              wall_start);
    return clock.speech_ms + Rat(elapsed.count(), 1000);
  };

  auto decide = [&](const PolicyContext& ctx) -> Decision {
    if (const auto* waitk = std::get_if<WaitKSpec>(&config.policy)) return waitk_decide(ctx, *waitk);
    auto [decision, next_state] = mma_decide(ctx, std::get<MMASpec>(config.policy), std::move(mma_state));
    mma_state = std::move(next_state);
    return decision;
  };

  auto decision_phase = [&] {
    while (!hyp.finished) {
      if (static_cast<std::int64_t>(hyp.tokens.size()) >= config.max_tokens) {
        capped = true;
        break;
      }
      clock.add_compute(costs.cost_per_decision_ms);
      PolicyContext ctx{static_cast<std::int64_t>(hyp.tokens.size()), units_read, source_done, false};
      if (decide(ctx).action == Action::read) break;
      AgentContext agent_ctx{stream, frames_read, units_read, hyp.tokens};
      std::optional<std::string> token;
      try {
        token = config.agent->next_token(agent_ctx);
      } catch (const std::exception& e) {
        throw std::runtime_error("stream " + stream.id + ": agent failure: " + e.what());
      }
      clock.add_compute(costs.cost_per_token_ms);
      if (!token) {
        hyp.finished = true;
        break;
      }
      hyp.append(*token);
      DelayRecord record{static_cast<std::int64_t>(hyp.tokens.size()), frames_read,
                         nca_delay(frames_read, period), ca_now()};
      trace.events.push_back(WriteEvent{*token, record});
    }
  };

  for (std::int64_t frame = 1; frame <= stream.num_frames && !hyp.finished && !capped; ++frame) {
    ++frames_read;
    trace.events.push_back(ReadEvent{frame});
    clock.observe_frame(frame, period);
    if (frame == stream.num_frames) {
      source_done = true;
      trace.source_exhausted_at_event = trace.events.size() - 1;
    }
    if (frames_read % r_e != 0) continue;
    ++encoder.num_states;
    ++states_since_trigger;
    if (!recompute) clock.add_compute(costs.cost_per_state_ms);
    TriggerDecision td = std::visit(
        [&](const auto& pd) { return pd_trigger(pd, encoder.num_states); }, config.pre_decision);
    if (!td.fired) continue;
    if (recompute) clock.add_compute(costs.cost_per_state_ms * encoder.num_states);
    ++units_read;
    states_since_trigger = 0;
    trace.events.push_back(TriggerEvent{encoder.num_states});
    decision_phase();
  }

  // Forced end-of-stream trigger: once the source is exhausted the policy
  // must be able to finish the hypothesis, so trailing states are never
  // stranded behind an unfired p_tr.
  if (!hyp.finished && !capped) {
    source_done = true;
    if (states_since_trigger > 0) {
      if (recompute) clock.add_compute(costs.cost_per_state_ms * encoder.num_states);
      ++units_read;
    }
    trace.events.push_back(TriggerEvent{encoder.num_states});
    decision_phase();
  }
  return trace;
}

// --- Corpus-level execution -------------------------------------------------

using RefMap = std::map<std::string, std::vector<std::string>>;

struct AlignmentRecord {
  AlignmentLevel level = AlignmentLevel::word;
  std::vector<AlignmentSegment> segments;
};

using AlignmentMap = std::map<std::string, AlignmentRecord>;

struct CorpusEntry {
  SourceStream stream;
  std::optional<std::string> alignment_id;  // defaults to the stream id
};

enum class AgentKind { oracle, coverage };

inline std::string to_string(AgentKind kind) {
  return kind == AgentKind::oracle ? "oracle" : "coverage";
}

struct FlexiblePreDecisionSpec {};

// A corpus-level session template; per-stream configs are derived from it.
struct SessionBlueprint {
  std::variant<Rat, FlexiblePreDecisionSpec> pre_decision;  // fixed step_ms | flexible
  PolicySpec policy;
  CostModel cost_model;
  AgentKind agent_kind = AgentKind::oracle;
  std::string placeholder = "<unk>";
  std::int64_t subsample_factor = 4;
  std::int64_t max_tokens = 4096;
};

inline std::string policy_name(const PolicySpec& policy) {
  return std::holds_alternative<WaitKSpec>(policy) ? "wait-k" : "mma";
}

inline std::string policy_params(const PolicySpec& policy) {
  if (const auto* waitk = std::get_if<WaitKSpec>(&policy)) return "k=" + std::to_string(waitk->k);
  std::string out = "heads=";
  const auto& heads = std::get<MMASpec>(policy).heads;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (h > 0) out += "+";
    out += heads[h].name;
  }
  return out;
}

inline SessionConfig make_session_config(const SessionBlueprint& blueprint, const CorpusEntry& entry,
                                         const RefMap& refs, const AlignmentMap& alignments) {
  const SourceStream& stream = entry.stream;
  auto ref_it = refs.find(stream.id);
  if (ref_it == refs.end())
    throw std::runtime_error("stream " + stream.id + ": no reference with this id");
  if (ref_it->second.empty())
    throw std::runtime_error("stream " + stream.id + ": reference is empty");

  SessionConfig config;
  config.policy = blueprint.policy;
  config.cost_model = blueprint.cost_model;
  config.subsample_factor = blueprint.subsample_factor;
  config.max_tokens = blueprint.max_tokens;

  TraceConfig descriptor;
  descriptor.policy_name = policy_name(blueprint.policy);
  descriptor.policy_params = policy_params(blueprint.policy);
  descriptor.agent = to_string(blueprint.agent_kind);
  descriptor.cost_model = to_string(blueprint.cost_model);
  descriptor.subsample_factor = blueprint.subsample_factor;

  try {
    if (const auto* step = std::get_if<Rat>(&blueprint.pre_decision)) {
      config.pre_decision =
          FixedPreDecision(*step, stream.frame_period_ms, blueprint.subsample_factor);
      descriptor.pre_decision = "fixed";
      descriptor.step = format_fixed(*step);
    } else {
      std::string key = entry.alignment_id.value_or(stream.id);
      auto align_it = alignments.find(key);
      if (align_it == alignments.end())
        throw std::runtime_error("no alignment with id " + key);
      std::int64_t num_states = encoder_state_count(stream.num_frames, blueprint.subsample_factor);
      config.pre_decision =
          build_alignment_table(align_it->second.segments, num_states, blueprint.subsample_factor,
                                stream.frame_period_ms, align_it->second.level);
      descriptor.pre_decision = "flexible";
      descriptor.step = "flexible:" + to_string(align_it->second.level);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("stream " + stream.id + ": " + e.what());
  }

  if (blueprint.agent_kind == AgentKind::oracle)
    config.agent = oracle_agent(ref_it->second);
  else
    config.agent = coverage_oracle_agent(ref_it->second, stream.num_frames, blueprint.placeholder);

  config.descriptor = std::move(descriptor);
  return config;
}

inline unsigned sweep_thread_cap() {
  if (const char* env = std::getenv("SIMULSTREAM_THREADS")) {
    char* end = nullptr;
    long value = std::strtol(env, &end, 10);
    if (end && *end == '\0' && value >= 1) return static_cast<unsigned>(value);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs one blueprint over a corpus; sessions are independent and may run
// in parallel, results are ordered by entry position regardless of
// completion order.
inline std::vector<Trace> run_corpus(const std::vector<CorpusEntry>& entries,
                                     const SessionBlueprint& blueprint, const RefMap& refs,
                                     const AlignmentMap& alignments = {}, unsigned threads = 0) {
  if (entries.empty()) throw std::invalid_argument("corpus is empty");
  if (threads == 0) threads = sweep_thread_cap();
  threads = std::min<unsigned>(threads, static_cast<unsigned>(entries.size()));

  std::vector<Trace> traces(entries.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::once_flag failure_once;
  auto worker = [&] {
    for (;;) {
      std::size_t index = next.fetch_add(1);
      if (index >= entries.size()) return;
      try {
        SessionConfig config = make_session_config(blueprint, entries[index], refs, alignments);
        traces[index] = run_session(entries[index].stream, config);
      } catch (...) {
        std::call_once(failure_once, [&] { failure = std::current_exception(); });
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return traces;
}

// --- Corpus summaries --------------------------------------------------------

struct GroupSummary {
  TraceConfig descriptor;
  std::size_t sessions = 0;
  bool has_bleu = false;
  double bleu = 0.0;
  Rat al_nca_ms{0};
  Rat al_ca_ms{0};
  Rat mean_ca_gap_ms{0};
  bool ref_fallback = false;
};

// Corpus BLEU plus corpus AL (mean over sessions of per-session AL) for a
// group of traces that share one configuration. An empty RefMap selects
// the |Y*| = |Y| fallback and leaves BLEU unset; a non-empty RefMap must
// cover every trace id.
inline GroupSummary summarize_traces(const std::vector<Trace>& traces, const RefMap& refs,
                                     int bleu_max_order = 4, bool bleu_smoothing = false) {
  if (traces.empty()) throw std::invalid_argument("no traces to summarize");
  GroupSummary summary;
  summary.descriptor = traces.front().config;
  summary.sessions = traces.size();
  for (const auto& trace : traces)
    if (trace.config != summary.descriptor)
      throw std::invalid_argument("summarize_traces: traces mix configurations");

  std::vector<EvalPair> pairs;
  Rat nca_sum{0};
  Rat ca_sum{0};
  for (const auto& trace : traces) {
    std::int64_t ref_len = 0;
    if (!refs.empty()) {
      auto it = refs.find(trace.stream_id);
      if (it == refs.end())
        throw std::runtime_error("trace " + trace.stream_id + ": no reference with this id");
      ref_len = static_cast<std::int64_t>(it->second.size());
      pairs.push_back({trace.tokens(), it->second});
    } else {
      summary.ref_fallback = true;
    }
    nca_sum += al_from_trace(trace, DelayFlavor::nca, ref_len).al_ms;
    ca_sum += al_from_trace(trace, DelayFlavor::ca, ref_len).al_ms;
  }
  auto count = static_cast<std::int64_t>(traces.size());
  summary.al_nca_ms = nca_sum / count;
  summary.al_ca_ms = ca_sum / count;
  summary.mean_ca_gap_ms = summary.al_ca_ms - summary.al_nca_ms;
  if (!pairs.empty()) {
    summary.bleu = corpus_bleu(pairs, bleu_max_order, bleu_smoothing);
    summary.has_bleu = true;
  }
  return summary;
}

// Every (entry, blueprint) session followed by per-blueprint aggregation:
// one summary row per blueprint.
inline std::vector<GroupSummary> run_sweep(const std::vector<CorpusEntry>& entries,
                                           const std::vector<SessionBlueprint>& blueprints,
                                           const RefMap& refs, const AlignmentMap& alignments = {},
                                           unsigned threads = 0, int bleu_max_order = 4,
                                           bool bleu_smoothing = false) {
  if (blueprints.empty()) throw std::invalid_argument("sweep needs at least one configuration");
  std::vector<GroupSummary> rows;
  rows.reserve(blueprints.size());
  for (const auto& blueprint : blueprints) {
    std::vector<Trace> traces = run_corpus(entries, blueprint, refs, alignments, threads);
    rows.push_back(summarize_traces(traces, refs, bleu_max_order, bleu_smoothing));
  }
  return rows;
}

}  // namespace simulst
