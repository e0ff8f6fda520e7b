#pragma once

// File formats and report rendering. Everything line-delimited and keyed
// by id:
//   manifest:   {"id","num_frames","frame_period_ms","feature_file"?,"alignment_id"?}
//   alignments: {"id","level","segments":[{"label","start_ms","end_ms"},...]}
//   references: TSV "id<TAB>reference text"
//   stepwise:   {"i","j","p"}
//   traces:     {"id","events":[{"t":"R","frame":n} | {"t":"W","token":s,"n":n,
//               "d_nca":ms,"d_ca":ms}],"config":{...}}
//   features:   16-byte header (magic "SSTF", u32 frames, u32 dim, 4 reserved
//               bytes), then frames*dim little-endian f32, row-major
// Reports are CSV with a fixed header and 3-decimal numbers; rendering is
// a pure function of its inputs, so re-running is byte-identical.

#include "simulst/simulator.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

namespace simulst::io {

using json = nlohmann::ordered_json;

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

inline json parse_record(const std::string& line, const std::string& path, std::size_t lineno) {
  json record = json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object())
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed record");
  return record;
}

inline Rat ms_field(const json& record, const char* key) {
  return rat_ms_from_double(record.at(key).get<double>());
}

}  // namespace detail

// --- Manifest ----------------------------------------------------------------

struct ManifestEntry {
  SourceStream stream;
  std::optional<std::string> feature_file;
  std::optional<std::string> alignment_id;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::vector<ManifestEntry> entries;
  std::map<std::string, bool> seen;
  std::size_t lineno = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++lineno;
    json record = detail::parse_record(line, path, lineno);
    ManifestEntry entry;
    entry.stream.id = record.at("id").get<std::string>();
    entry.stream.num_frames = record.at("num_frames").get<std::int64_t>();
    entry.stream.frame_period_ms = detail::ms_field(record, "frame_period_ms");
    if (record.contains("feature_file")) entry.feature_file = record["feature_file"].get<std::string>();
    if (record.contains("alignment_id")) entry.alignment_id = record["alignment_id"].get<std::string>();
    if (seen[entry.stream.id]) throw std::runtime_error(path + ": duplicate id " + entry.stream.id);
    seen[entry.stream.id] = true;
    auto violations = validate_stream(entry.stream);
    if (!violations.empty()) throw std::runtime_error(path + ": " + violations.front());
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) throw std::runtime_error(path + ": empty manifest");
  return entries;
}

// --- References (TSV) ---------------------------------------------------------

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

inline RefMap load_refs(const std::string& path) {
  RefMap refs;
  std::size_t lineno = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++lineno;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected id<TAB>text");
    std::string id = line.substr(0, tab);
    if (refs.count(id)) throw std::runtime_error(path + ": duplicate id " + id);
    refs[id] = tokenize(line.substr(tab + 1));
  }
  if (refs.empty()) throw std::runtime_error(path + ": empty references");
  return refs;
}

// --- Alignments ----------------------------------------------------------------

inline AlignmentMap load_alignments(const std::string& path) {
  AlignmentMap alignments;
  std::size_t lineno = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++lineno;
    json record = detail::parse_record(line, path, lineno);
    std::string id = record.at("id").get<std::string>();
    if (alignments.count(id)) throw std::runtime_error(path + ": duplicate id " + id);
    AlignmentRecord rec;
    std::string level = record.at("level").get<std::string>();
    if (level == "word")
      rec.level = AlignmentLevel::word;
    else if (level == "phoneme")
      rec.level = AlignmentLevel::phoneme;
    else
      throw std::runtime_error(path + ": id " + id + ": level must be word or phoneme");
    for (const auto& seg : record.at("segments")) {
      rec.segments.push_back({seg.at("label").get<std::string>(), detail::ms_field(seg, "start_ms"),
                              detail::ms_field(seg, "end_ms")});
    }
    if (rec.segments.empty()) throw std::runtime_error(path + ": id " + id + ": no segments");
    alignments[id] = std::move(rec);
  }
  return alignments;
}

// --- Stepwise probability tables -----------------------------------------------

inline std::map<std::pair<std::int64_t, std::int64_t>, Rat> load_stepwise_table(
    const std::string& path) {
  std::map<std::pair<std::int64_t, std::int64_t>, Rat> table;
  std::size_t lineno = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++lineno;
    json record = detail::parse_record(line, path, lineno);
    std::int64_t i = record.at("i").get<std::int64_t>();
    std::int64_t j = record.at("j").get<std::int64_t>();
    if (i < 1 || j < 1)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": i and j must be >= 1");
    table[{i, j}] = rat_prob_from_double(record.at("p").get<double>());
  }
  return table;
}

// --- Feature files ("SSTF") -----------------------------------------------------

inline void write_features(const std::string& path, const std::vector<std::vector<float>>& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::uint32_t frames = static_cast<std::uint32_t>(features.size());
  std::uint32_t dim = frames == 0 ? 0 : static_cast<std::uint32_t>(features.front().size());
  char header[16] = {'S', 'S', 'T', 'F'};
  std::memcpy(header + 4, &frames, 4);
  std::memcpy(header + 8, &dim, 4);
  out.write(header, sizeof(header));
  for (const auto& row : features) {
    if (row.size() != dim) throw std::invalid_argument("ragged feature rows");
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

inline std::vector<std::vector<float>> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char header[16];
  if (!in.read(header, sizeof(header)) || std::memcmp(header, "SSTF", 4) != 0)
    throw std::runtime_error(path + ": not a feature file (bad magic)");
  std::uint32_t frames = 0;
  std::uint32_t dim = 0;
  std::memcpy(&frames, header + 4, 4);
  std::memcpy(&dim, header + 8, 4);
  std::vector<std::vector<float>> features(frames, std::vector<float>(dim));
  for (auto& row : features)
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(dim * sizeof(float))))
      throw std::runtime_error(path + ": truncated feature file");
  return features;
}

// --- Traces ----------------------------------------------------------------------

inline json events_to_json(const Trace& trace) {
  json events = json::array();
  for (const auto& ev : trace.events) {
    if (const auto* r = std::get_if<ReadEvent>(&ev)) {
      events.push_back({{"t", "R"}, {"frame", r->frame}});
    } else if (const auto* w = std::get_if<WriteEvent>(&ev)) {
      events.push_back({{"t", "W"},
                        {"token", w->token},
                        {"n", w->record.frames_read},
                        {"d_nca", to_double(w->record.d_nca_ms)},
                        {"d_ca", to_double(w->record.d_ca_ms)}});
    }
    // TRIGGER events are in-memory bookkeeping only.
  }
  return events;
}

inline std::string trace_to_line(const Trace& trace) {
  json record;
  record["id"] = trace.stream_id;
  record["events"] = events_to_json(trace);
  record["config"] = {{"policy", trace.config.policy_name},
                      {"params", trace.config.policy_params},
                      {"pre_decision", trace.config.pre_decision},
                      {"step", trace.config.step},
                      {"agent", trace.config.agent},
                      {"cost_model", trace.config.cost_model},
                      {"subsample_factor", trace.config.subsample_factor},
                      {"num_frames", trace.num_frames},
                      {"frame_period_ms", to_double(trace.frame_period_ms)}};
  return record.dump();
}

inline Trace trace_from_line(const std::string& line, const std::string& path, std::size_t lineno) {
  json record = detail::parse_record(line, path, lineno);
  Trace trace;
  trace.stream_id = record.at("id").get<std::string>();
  const json& config = record.at("config");
  trace.config.policy_name = config.at("policy").get<std::string>();
  trace.config.policy_params = config.at("params").get<std::string>();
  trace.config.pre_decision = config.at("pre_decision").get<std::string>();
  trace.config.step = config.at("step").get<std::string>();
  trace.config.agent = config.at("agent").get<std::string>();
  trace.config.cost_model = config.at("cost_model").get<std::string>();
  trace.config.subsample_factor = config.at("subsample_factor").get<std::int64_t>();
  trace.num_frames = config.at("num_frames").get<std::int64_t>();
  trace.frame_period_ms = detail::ms_field(config, "frame_period_ms");
  std::int64_t writes = 0;
  for (const auto& ev : record.at("events")) {
    std::string type = ev.at("t").get<std::string>();
    if (type == "R") {
      trace.events.push_back(ReadEvent{ev.at("frame").get<std::int64_t>()});
    } else if (type == "W") {
      DelayRecord rec;
      rec.token_index = ++writes;
      rec.frames_read = ev.at("n").get<std::int64_t>();
      rec.d_nca_ms = detail::ms_field(ev, "d_nca");
      if (!ev.contains("d_ca"))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": WRITE event lacks d_ca");
      rec.d_ca_ms = detail::ms_field(ev, "d_ca");
      trace.events.push_back(WriteEvent{ev.at("token").get<std::string>(), rec});
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown event type " + type);
    }
  }
  return trace;
}

inline void write_traces(const std::string& path, const std::vector<Trace>& traces) {
  std::string out;
  for (const auto& trace : traces) {
    out += trace_to_line(trace);
    out += '\n';
  }
  detail::write_file(path, out);
}

inline std::vector<Trace> load_traces(const std::string& path) {
  std::vector<Trace> traces;
  std::size_t lineno = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++lineno;
    traces.push_back(trace_from_line(line, path, lineno));
  }
  if (traces.empty()) throw std::runtime_error(path + ": empty trace file");
  return traces;
}

// --- Report CSV -------------------------------------------------------------------

// Orders embedded integers numerically ("k=2" < "k=10") so grid sweeps
// render in grid order.
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < a.size() && j < b.size()) {
    if (is_digit(a[i]) && is_digit(b[j])) {
      std::size_t i_end = i;
      std::size_t j_end = j;
      while (i_end < a.size() && is_digit(a[i_end])) ++i_end;
      while (j_end < b.size() && is_digit(b[j_end])) ++j_end;
      std::string_view da(a.data() + i, i_end - i);
      std::string_view db(b.data() + j, j_end - j);
      std::string_view ta = da.substr(std::min(da.find_first_not_of('0'), da.size() - 1));
      std::string_view tb = db.substr(std::min(db.find_first_not_of('0'), db.size() - 1));
      if (ta.size() != tb.size()) return ta.size() < tb.size();
      if (ta != tb) return ta < tb;
      i = i_end;
      j = j_end;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  return a.size() - i < b.size() - j;
}

inline void sort_rows(std::vector<GroupSummary>& rows) {
  std::sort(rows.begin(), rows.end(), [](const GroupSummary& x, const GroupSummary& y) {
    if (x.descriptor.policy_name != y.descriptor.policy_name)
      return x.descriptor.policy_name < y.descriptor.policy_name;
    if (x.descriptor.policy_params != y.descriptor.policy_params)
      return natural_less(x.descriptor.policy_params, y.descriptor.policy_params);
    if (x.descriptor.pre_decision != y.descriptor.pre_decision)
      return x.descriptor.pre_decision < y.descriptor.pre_decision;
    return natural_less(x.descriptor.step, y.descriptor.step);
  });
}

// One row per (policy, params, pre-decision, step) group, sorted by policy
// name then params then step.
inline std::vector<GroupSummary> summarize_trace_files(const std::vector<Trace>& traces,
                                                       const RefMap& refs, int bleu_max_order = 4,
                                                       bool bleu_smoothing = false) {
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<Trace>> groups;
  for (const auto& trace : traces)
    groups[{trace.config.policy_name, trace.config.policy_params, trace.config.pre_decision,
            trace.config.step}]
        .push_back(trace);
  std::vector<GroupSummary> rows;
  for (auto& [key, group] : groups) {
    // Cost-model or subsample mismatches inside a group are configuration
    // mixing the row cannot express.
    for (const auto& trace : group)
      if (trace.config != group.front().config)
        throw std::runtime_error("traces with matching policy/pre-decision mix other configuration");
    rows.push_back(summarize_traces(group, refs, bleu_max_order, bleu_smoothing));
  }
  sort_rows(rows);
  return rows;
}

inline std::string render_report_csv(const std::vector<GroupSummary>& rows,
                                     bool bleu_smoothing = false) {
  std::string csv = std::string("policy,params,pre_decision,step,") +
                    (bleu_smoothing ? "bleu_add1" : "bleu") +
                    ",al_nca_ms,al_ca_ms,mean_ca_gap_ms,ref_fallback\n";
  for (const auto& row : rows) {
    char bleu[32] = "";
    if (row.has_bleu) std::snprintf(bleu, sizeof(bleu), "%.3f", row.bleu);
    csv += row.descriptor.policy_name + "," + row.descriptor.policy_params + "," +
           row.descriptor.pre_decision + "," + row.descriptor.step + "," + bleu + "," +
           format_fixed(row.al_nca_ms) + "," + format_fixed(row.al_ca_ms) + "," +
           format_fixed(row.mean_ca_gap_ms) + "," + (row.ref_fallback ? "1" : "0") + "\n";
  }
  return csv;
}

// --- Cost model / grid parsing ------------------------------------------------------

// "incremental" | "recompute" [":" state_ms ["," decision_ms ["," token_ms]]]
// or "wall" for the host-time profiling clock.
inline CostModel parse_cost_model(const std::string& text) {
  CostModel model;
  std::string mode = text;
  std::string costs;
  auto colon = text.find(':');
  if (colon != std::string::npos) {
    mode = text.substr(0, colon);
    costs = text.substr(colon + 1);
  }
  if (mode == "incremental")
    model.encoder_mode = EncoderMode::incremental;
  else if (mode == "recompute")
    model.encoder_mode = EncoderMode::recompute;
  else if (mode == "wall")
    model.wall_clock = true;
  else
    throw std::invalid_argument("cost model mode must be incremental, recompute, or wall: " + text);
  if (!costs.empty()) {
    std::vector<Rat*> slots = {&model.cost_per_state_ms, &model.cost_per_decision_ms,
                               &model.cost_per_token_ms};
    std::size_t slot = 0;
    std::istringstream in(costs);
    std::string piece;
    while (std::getline(in, piece, ',')) {
      if (slot >= slots.size()) throw std::invalid_argument("too many cost model entries: " + text);
      *slots[slot++] = rat_from_decimal(piece);
    }
  }
  check_cost_model(model);
  return model;
}

// "1..10" or "1,3,5"
inline std::vector<std::int64_t> parse_int_grid(const std::string& text) {
  std::vector<std::int64_t> values;
  auto dots = text.find("..");
  if (dots != std::string::npos) {
    std::int64_t lo = std::stoll(text.substr(0, dots));
    std::int64_t hi = std::stoll(text.substr(dots + 2));
    for (std::int64_t v = lo; v <= hi; ++v) values.push_back(v);
  } else {
    std::istringstream in(text);
    std::string piece;
    while (std::getline(in, piece, ',')) values.push_back(std::stoll(piece));
  }
  if (values.empty()) throw std::invalid_argument("empty grid: " + text);
  return values;
}

// "120,280,560" (ms decimals)
inline std::vector<Rat> parse_step_grid(const std::string& text) {
  std::vector<Rat> values;
  std::istringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ',')) values.push_back(rat_from_decimal(piece));
  if (values.empty()) throw std::invalid_argument("empty grid: " + text);
  return values;
}

}  // namespace simulst::io
