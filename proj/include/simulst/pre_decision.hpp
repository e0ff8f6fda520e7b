#pragma once

// Pre-decision modules: gates over encoder states that emit trigger
// probabilities p_tr. A READ/WRITE decision is only consulted when a
// trigger fires, which groups states into decision units. Two modules:
// a fixed time grid and an oracle module driven by word/phoneme
// boundary alignments.

#include "simulst/rational.hpp"
#include "simulst/stream.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace simulst {

struct TriggerDecision {
  std::int64_t state_index = 0;  // j
  Rat probability{0};            // p_tr(j)
  bool fired = false;            // p_tr > 0.5
};

inline TriggerDecision make_trigger_decision(std::int64_t state_index, const Rat& probability) {
  bool fired = probability > Rat(1, 2);
  return {state_index, probability, fired};
}

// Fires every step_ms of speech: p_tr(j) = 1 iff mod(j * r_e * T_s, step) = 0.
class FixedPreDecision {
 public:
  FixedPreDecision(const Rat& step_ms, const Rat& frame_period_ms, std::int64_t subsample_factor)
      : step_ms_(step_ms),
        frame_period_ms_(frame_period_ms),
        subsample_factor_(subsample_factor) {
    if (frame_period_ms_ <= Rat(0)) throw std::invalid_argument("frame_period_ms must be > 0");
    if (subsample_factor_ < 1) throw std::invalid_argument("subsample_factor must be >= 1");
    if (step_ms_ <= Rat(0)) throw std::invalid_argument("step_ms must be > 0");
    Rat ratio = step_ms_ / frame_period_ms_;
    if (ratio.denominator() != 1)
      throw std::invalid_argument("step_ms must be a positive integer multiple of frame_period_ms");
    step_frames_ = ratio.numerator();
  }

  const Rat& step_ms() const { return step_ms_; }
  const Rat& frame_period_ms() const { return frame_period_ms_; }
  std::int64_t subsample_factor() const { return subsample_factor_; }

  TriggerDecision trigger(std::int64_t state_index) const {
    if (state_index < 1) throw std::invalid_argument("state_index must be >= 1");
    // j * r_e * T_s mod step == 0  <=>  j * r_e mod (step / T_s) == 0
    bool zero = (state_index * subsample_factor_) % step_frames_ == 0;
    return make_trigger_decision(state_index, zero ? Rat(1) : Rat(0));
  }

 private:
  Rat step_ms_;
  Rat frame_period_ms_;
  std::int64_t subsample_factor_ = 1;
  std::int64_t step_frames_ = 1;  // step_ms / frame_period_ms
};

inline TriggerDecision fixed_trigger(std::int64_t state_index, const FixedPreDecision& config) {
  return config.trigger(state_index);
}

enum class AlignmentLevel { word, phoneme };

inline std::string to_string(AlignmentLevel level) {
  return level == AlignmentLevel::word ? "word" : "phoneme";
}

// Oracle state-to-label map A: fires where the aligned label changes.
struct AlignmentTable {
  AlignmentLevel level = AlignmentLevel::word;
  // state_labels[j-1] is the label index A(h_j); non-decreasing in j.
  std::vector<std::int64_t> state_labels;

  std::int64_t num_states() const { return static_cast<std::int64_t>(state_labels.size()); }
};

// p_tr(j) = 0 if A(h_j) = A(h_{j-1}), else 1. A(h_0) does not exist, so
// p_tr(1) = 0 by convention: a trigger at state 1 would decide on
// near-zero context.
inline TriggerDecision flexible_trigger(std::int64_t state_index, const AlignmentTable& table) {
  if (state_index < 1 || state_index > table.num_states())
    throw std::out_of_range("state_index out of range");
  if (state_index == 1) return make_trigger_decision(state_index, Rat(0));
  bool changed = table.state_labels[state_index - 1] != table.state_labels[state_index - 2];
  return make_trigger_decision(state_index, changed ? Rat(1) : Rat(0));
}

struct AlignmentSegment {
  std::string label;
  Rat start_ms{0};
  Rat end_ms{0};
};

// State j covers speech time ((j-1)*r_e*T_s, j*r_e*T_s] and takes the label
// (segment index) of the segment containing its midpoint. States in silence
// gaps inherit the previous segment's label; a leading gap takes the first
// segment's label.
inline AlignmentTable build_alignment_table(const std::vector<AlignmentSegment>& segments,
                                            std::int64_t num_states, std::int64_t subsample_factor,
                                            const Rat& frame_period_ms,
                                            AlignmentLevel level = AlignmentLevel::word) {
  if (num_states < 0) throw std::invalid_argument("num_states must be >= 0");
  if (segments.empty()) throw std::invalid_argument("alignment needs at least one segment");
  if (subsample_factor < 1) throw std::invalid_argument("subsample_factor must be >= 1");
  if (frame_period_ms <= Rat(0)) throw std::invalid_argument("frame_period_ms must be > 0");
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].end_ms <= segments[s].start_ms)
      throw std::invalid_argument("segment '" + segments[s].label + "' has end_ms <= start_ms");
    if (s > 0 && segments[s].start_ms < segments[s - 1].end_ms)
      throw std::invalid_argument("segments overlap or are unsorted at '" + segments[s].label + "'");
  }

  AlignmentTable table;
  table.level = level;
  table.state_labels.reserve(static_cast<std::size_t>(num_states));
  Rat state_span = frame_period_ms * subsample_factor;
  std::size_t cursor = 0;
  for (std::int64_t j = 1; j <= num_states; ++j) {
    Rat midpoint = state_span * j - state_span / 2;
    while (cursor + 1 < segments.size() && midpoint >= segments[cursor + 1].start_ms) ++cursor;
    // `cursor` is the last segment starting at or before the midpoint
    // (or 0 in a leading gap, which inherits the first segment).
    table.state_labels.push_back(static_cast<std::int64_t>(cursor));
  }
  return table;
}

struct BoundaryStats {
  Rat mean_segment_ms{0};
  std::size_t count = 0;
};

inline BoundaryStats boundary_stats(const std::vector<AlignmentSegment>& segments) {
  if (segments.empty()) throw std::invalid_argument("boundary_stats needs at least one segment");
  Rat total{0};
  for (const auto& seg : segments) total += seg.end_ms - seg.start_ms;
  return {total / static_cast<std::int64_t>(segments.size()), segments.size()};
}

}  // namespace simulst
