#pragma once

// Time-based Average Lagging over a delay sequence (CA or NCA flavor)
// and the latency-regularized objective value.
//
// AL compares each token's delay with an oracle that both translates
// perfectly and spends the source's time budget evenly across the
// reference: AL = (1/tau) * sum_{i=1..tau} [ d(y_i) - (|X|/|Y*|) * T_s * (i-1) ],
// where tau is the index of the first token generated after the full
// input was read. Averaging stops at tau and the oracle term uses the
// reference length, which keeps the value meaningful when the hypothesis
// is much shorter than the reference.

#include "simulst/rational.hpp"
#include "simulst/stream.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace simulst {

struct ALInput {
  std::vector<Rat> delays_ms;            // d(y_i), all CA or all NCA
  std::int64_t num_frames = 0;           // |X|
  Rat frame_period_ms{0};                // T_s
  std::int64_t reference_length = 0;     // |Y*|
  std::int64_t full_read_token_index = 0;  // tau(|X|)
};

// Smallest i with n(y_i) = |X|; if the hypothesis finished before the
// full source was read, every emitted token lags the oracle, so tau = |Y|.
inline std::int64_t tau_full_read(const Trace& trace) {
  std::int64_t i = 0;
  std::int64_t total = 0;
  for (const auto& ev : trace.events) {
    if (const auto* w = std::get_if<WriteEvent>(&ev)) {
      ++total;
      if (i == 0 && w->record.frames_read >= trace.num_frames) i = total;
    }
  }
  if (total == 0) throw std::invalid_argument("trace has no WRITE events");
  return i == 0 ? total : i;
}

inline Rat average_lagging(const ALInput& input) {
  const std::int64_t tau = input.full_read_token_index;
  if (input.reference_length < 1) throw std::invalid_argument("reference_length must be >= 1");
  if (tau < 1 || tau > static_cast<std::int64_t>(input.delays_ms.size()))
    throw std::invalid_argument("full_read_token_index out of range");
  if (input.num_frames < 1) throw std::invalid_argument("num_frames must be >= 1");
  for (std::size_t i = 1; i < input.delays_ms.size(); ++i)
    if (input.delays_ms[i] < input.delays_ms[i - 1])
      throw std::invalid_argument("delays_ms must be non-decreasing");

  // Oracle time budget per token: (|X| / |Y*|) * T_s.
  Rat oracle_step = Rat(input.num_frames, input.reference_length) * input.frame_period_ms;
  Rat sum{0};
  for (std::int64_t i = 1; i <= tau; ++i)
    sum += input.delays_ms[static_cast<std::size_t>(i - 1)] - oracle_step * (i - 1);
  return sum / tau;
}

struct ObjectiveInput {
  Rat neg_log_likelihood{0};  // -log P(Y|X), >= 0
  Rat latency_cost_ms{0};     // C(D); may be negative
  Rat lambda{0};              // >= 0
};

// L = -log P(Y|X) + lambda * max(C(D), 0). Negative latency cost (model
// ahead of the oracle) is not regularized.
inline Rat regularized_objective(const ObjectiveInput& input) {
  if (input.lambda < Rat(0)) throw std::invalid_argument("lambda must be >= 0");
  if (input.neg_log_likelihood < Rat(0))
    throw std::invalid_argument("neg_log_likelihood must be >= 0");
  Rat clamped = input.latency_cost_ms > Rat(0) ? input.latency_cost_ms : Rat(0);
  return input.neg_log_likelihood + input.lambda * clamped;
}

enum class DelayFlavor { nca, ca };

// Convenience: AL of a trace using one delay flavor. reference_length = 0
// requests the |Y*| = |Y| fallback (no reference available).
struct TraceAL {
  Rat al_ms{0};
  bool ref_fallback = false;
};

inline TraceAL al_from_trace(const Trace& trace, DelayFlavor flavor, std::int64_t reference_length = 0) {
  ALInput input;
  for (const auto& rec : trace.delays())
    input.delays_ms.push_back(flavor == DelayFlavor::nca ? rec.d_nca_ms : rec.d_ca_ms);
  input.num_frames = trace.num_frames;
  input.frame_period_ms = trace.frame_period_ms;
  bool fallback = reference_length < 1;
  input.reference_length = fallback ? static_cast<std::int64_t>(input.delays_ms.size()) : reference_length;
  input.full_read_token_index = tau_full_read(trace);
  return {average_lagging(input), fallback};
}

}  // namespace simulst
