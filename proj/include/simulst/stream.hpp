#pragma once

// Timed source streams, encoder-state accounting, hypotheses, and the
// per-session READ/TRIGGER/WRITE trace with both delay flavors (NCA:
// speech time only; CA: speech time plus computation).

#include "simulst/rational.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace simulst {

struct SourceStream {
  std::string id;
  std::int64_t num_frames = 0;               // |X|, >= 1
  Rat frame_period_ms{0};                    // T_s, > 0
  // Per-frame feature vectors; only agents ever look at these.
  std::optional<std::vector<std::vector<float>>> features;
};

inline std::vector<std::string> validate_stream(const SourceStream& s) {
  std::vector<std::string> violations;
  if (s.num_frames < 1) violations.push_back("stream " + s.id + ": num_frames must be >= 1");
  if (s.frame_period_ms <= Rat(0)) violations.push_back("stream " + s.id + ": frame_period_ms must be > 0");
  if (s.features && static_cast<std::int64_t>(s.features->size()) != s.num_frames)
    violations.push_back("stream " + s.id + ": feature count does not equal num_frames");
  return violations;
}

// Number of encoder states after `frames_read` frames with subsampling
// factor r_e; a new state j exists once frames_read >= j * r_e.
inline std::int64_t encoder_state_count(std::int64_t frames_read, std::int64_t subsample_factor) {
  if (subsample_factor < 1) throw std::invalid_argument("subsample_factor must be >= 1");
  if (frames_read < 0) throw std::invalid_argument("frames_read must be >= 0");
  return frames_read / subsample_factor;
}

struct EncoderStateSeq {
  std::int64_t subsample_factor = 1;  // r_e
  std::int64_t num_states = 0;        // |H| = floor(frames_read / r_e)

  static EncoderStateSeq from_frames(std::int64_t frames_read, std::int64_t subsample_factor) {
    return {subsample_factor, encoder_state_count(frames_read, subsample_factor)};
  }
};

struct Hypothesis {
  std::vector<std::string> tokens;  // append-only within a session
  bool finished = false;

  void append(std::string token) {
    if (finished) throw std::logic_error("append to finished hypothesis");
    tokens.push_back(std::move(token));
  }
};

inline Rat nca_delay(std::int64_t frames_read, const Rat& frame_period_ms) {
  if (frames_read < 0) throw std::invalid_argument("frames_read must be >= 0");
  return frame_period_ms * frames_read;
}

struct DelayRecord {
  std::int64_t token_index = 0;  // 1-based i
  std::int64_t frames_read = 0;  // n(y_i)
  Rat d_nca_ms{0};
  Rat d_ca_ms{0};

  bool operator==(const DelayRecord&) const = default;
};

struct ReadEvent {
  std::int64_t frame = 0;  // 1-based, strictly increasing, contiguous
  bool operator==(const ReadEvent&) const = default;
};

struct TriggerEvent {
  std::int64_t state = 0;
  bool operator==(const TriggerEvent&) const = default;
};

struct WriteEvent {
  std::string token;
  DelayRecord record;
  bool operator==(const WriteEvent&) const = default;
};

using TraceEvent = std::variant<ReadEvent, TriggerEvent, WriteEvent>;

// Descriptor strings echoed into trace files so reports can group sessions.
struct TraceConfig {
  std::string policy_name;
  std::string policy_params;
  std::string pre_decision;  // "fixed" or "flexible"
  std::string step;          // "280.000" or "flexible:word" / "flexible:phoneme"
  std::string agent;
  std::string cost_model;
  std::int64_t subsample_factor = 0;

  bool operator==(const TraceConfig&) const = default;
};

struct Trace {
  std::string stream_id;
  std::int64_t num_frames = 0;  // |X|
  Rat frame_period_ms{0};       // T_s
  std::vector<TraceEvent> events;
  std::optional<std::size_t> source_exhausted_at_event;
  TraceConfig config;

  // One DelayRecord per WRITE event, in order; the sequence the latency
  // metrics consume.
  std::vector<DelayRecord> delays() const {
    std::vector<DelayRecord> out;
    for (const auto& ev : events)
      if (const auto* w = std::get_if<WriteEvent>(&ev)) out.push_back(w->record);
    return out;
  }

  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    for (const auto& ev : events)
      if (const auto* w = std::get_if<WriteEvent>(&ev)) out.push_back(w->token);
    return out;
  }

  bool operator==(const Trace&) const = default;
};

// Invariant checker; violations are data, not errors. Empty result means
// the trace is well formed.
inline std::vector<std::string> validate_trace(const Trace& trace) {
  std::vector<std::string> violations;
  std::int64_t expected_frame = 1;
  std::int64_t write_count = 0;
  std::int64_t prev_frames_read = 0;
  for (const auto& ev : trace.events) {
    if (const auto* r = std::get_if<ReadEvent>(&ev)) {
      if (r->frame != expected_frame)
        violations.push_back("READ frame " + std::to_string(r->frame) + " out of order (expected " +
                             std::to_string(expected_frame) + ")");
      else
        ++expected_frame;
    } else if (const auto* w = std::get_if<WriteEvent>(&ev)) {
      ++write_count;
      const DelayRecord& rec = w->record;
      std::string at = "token " + std::to_string(rec.token_index);
      if (rec.token_index != write_count)
        violations.push_back(at + ": token_index does not match WRITE order " + std::to_string(write_count));
      if (rec.frames_read < prev_frames_read)
        violations.push_back(at + ": frames_read decreases (monotonic n violated)");
      prev_frames_read = rec.frames_read;
      if (rec.d_nca_ms != trace.frame_period_ms * rec.frames_read)
        violations.push_back(at + ": d_nca_ms != frame_period_ms * frames_read");
      if (rec.d_ca_ms < rec.d_nca_ms) violations.push_back(at + ": d_ca_ms < d_nca_ms");
      if (rec.frames_read > trace.num_frames)
        violations.push_back(at + ": frames_read exceeds num_frames");
    }
  }
  if (expected_frame - 1 > trace.num_frames)
    violations.push_back("more READ events than num_frames");
  return violations;
}

}  // namespace simulst
