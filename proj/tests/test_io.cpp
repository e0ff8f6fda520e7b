#include "simulst/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace simulst;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("simulst_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void put(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  out << contents;
}

Trace sample_trace() {
  SourceStream stream{"u0", 24, Rat(10), std::nullopt};
  SessionConfig config;
  config.pre_decision = FixedPreDecision(Rat(40), Rat(10), 4);
  config.policy = WaitKSpec{2};
  config.agent = oracle_agent({"der", "kleine", "hund", "bellt"});
  config.cost_model.cost_per_token_ms = Rat(5, 2);
  config.subsample_factor = 4;
  config.descriptor = {"wait-k", "k=2", "fixed", "40.000", "oracle", to_string(config.cost_model), 4};
  return run_session(stream, config);
}

}  // namespace

TEST_CASE("manifest parsing validates entries") {
  TempDir dir;
  auto path = dir.file("manifest.jsonl");
  put(path,
      R"({"id":"u0","num_frames":120,"frame_period_ms":10})"
      "\n"
      R"({"id":"u1","num_frames":80,"frame_period_ms":12.5,"alignment_id":"a1","feature_file":"u1.sstf"})"
      "\n");
  auto entries = io::load_manifest(path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].stream.num_frames == 120);
  CHECK(entries[0].stream.frame_period_ms == Rat(10));
  CHECK_FALSE(entries[0].alignment_id.has_value());
  CHECK(entries[1].stream.frame_period_ms == Rat(25, 2));
  CHECK(entries[1].alignment_id == "a1");
  CHECK(entries[1].feature_file == "u1.sstf");

  put(dir.file("dup.jsonl"),
      R"({"id":"u0","num_frames":10,"frame_period_ms":10})"
      "\n"
      R"({"id":"u0","num_frames":10,"frame_period_ms":10})"
      "\n");
  CHECK_THROWS_AS(io::load_manifest(dir.file("dup.jsonl")), std::runtime_error);

  put(dir.file("bad.jsonl"), R"({"id":"u0","num_frames":0,"frame_period_ms":10})"
                             "\n");
  CHECK_THROWS_AS(io::load_manifest(dir.file("bad.jsonl")), std::runtime_error);
  CHECK_THROWS_AS(io::load_manifest(dir.file("absent.jsonl")), std::runtime_error);
}

TEST_CASE("references parse as whitespace tokens keyed by id") {
  TempDir dir;
  auto path = dir.file("refs.tsv");
  put(path, "u0\tder kleine  hund\nu1\tein test\n");
  auto refs = io::load_refs(path);
  CHECK(refs.at("u0") == std::vector<std::string>{"der", "kleine", "hund"});
  CHECK(refs.at("u1").size() == 2);

  put(dir.file("notab.tsv"), "u0 der hund\n");
  CHECK_THROWS_AS(io::load_refs(dir.file("notab.tsv")), std::runtime_error);
}

TEST_CASE("alignments parse levels and segments") {
  TempDir dir;
  auto path = dir.file("align.jsonl");
  put(path,
      R"({"id":"u0","level":"word","segments":[{"label":"der","start_ms":0,"end_ms":240},{"label":"hund","start_ms":240,"end_ms":520}]})"
      "\n"
      R"({"id":"u1","level":"phoneme","segments":[{"label":"d","start_ms":0,"end_ms":77}]})"
      "\n");
  auto alignments = io::load_alignments(path);
  CHECK(alignments.at("u0").level == AlignmentLevel::word);
  CHECK(alignments.at("u0").segments.size() == 2);
  CHECK(alignments.at("u0").segments[1].end_ms == Rat(520));
  CHECK(alignments.at("u1").level == AlignmentLevel::phoneme);

  put(dir.file("badlevel.jsonl"), R"({"id":"x","level":"sentence","segments":[]})"
                                  "\n");
  CHECK_THROWS_AS(io::load_alignments(dir.file("badlevel.jsonl")), std::runtime_error);
}

TEST_CASE("stepwise tables parse probabilities") {
  TempDir dir;
  auto path = dir.file("table.jsonl");
  put(path, R"({"i":1,"j":2,"p":0.9})"
            "\n"
            R"({"i":2,"j":3,"p":0.25})"
            "\n");
  auto table = io::load_stepwise_table(path);
  CHECK(table.at({1, 2}) == Rat(9, 10));
  CHECK(table.at({2, 3}) == Rat(1, 4));

  put(dir.file("badp.jsonl"), R"({"i":1,"j":1,"p":1.5})"
                              "\n");
  CHECK_THROWS_AS(io::load_stepwise_table(dir.file("badp.jsonl")), std::invalid_argument);
}

TEST_CASE("feature files round-trip through the SSTF format") {
  TempDir dir;
  auto path = dir.file("feat.sstf");
  std::vector<std::vector<float>> features = {{1.f, 2.f, 3.f}, {4.f, 5.f, 6.f}};
  io::write_features(path, features);
  CHECK(io::load_features(path) == features);
  CHECK(fs::file_size(path) == 16 + 2 * 3 * sizeof(float));

  put(dir.file("bad.sstf"), "NOPE............");
  CHECK_THROWS_AS(io::load_features(dir.file("bad.sstf")), std::runtime_error);
}

TEST_CASE("traces round-trip with identical metrics") {
  TempDir dir;
  Trace trace = sample_trace();
  auto path = dir.file("traces.jsonl");
  io::write_traces(path, {trace});
  auto loaded = io::load_traces(path);
  REQUIRE(loaded.size() == 1);

  CHECK(validate_trace(loaded.front()).empty());
  CHECK(loaded.front().delays() == trace.delays());
  CHECK(loaded.front().tokens() == trace.tokens());
  CHECK(loaded.front().config == trace.config);
  CHECK(tau_full_read(loaded.front()) == tau_full_read(trace));
  for (auto flavor : {DelayFlavor::nca, DelayFlavor::ca})
    CHECK(al_from_trace(loaded.front(), flavor, 4).al_ms == al_from_trace(trace, flavor, 4).al_ms);

  // Serialization itself is stable.
  CHECK(io::trace_to_line(loaded.front()) == io::trace_to_line(trace));
}

TEST_CASE("trace lines follow the documented schema") {
  TempDir dir;
  auto path = dir.file("golden.jsonl");
  put(path,
      R"({"id":"u7","events":[{"t":"R","frame":1},{"t":"R","frame":2},)"
      R"({"t":"W","token":"hallo","n":2,"d_nca":25.0,"d_ca":31.25}],)"
      R"("config":{"policy":"wait-k","params":"k=1","pre_decision":"fixed","step":"25.000",)"
      R"("agent":"oracle","cost_model":"incremental:0.000,0.000,6.250","subsample_factor":2,)"
      R"("num_frames":2,"frame_period_ms":12.5}})"
      "\n");
  auto traces = io::load_traces(path);
  REQUIRE(traces.size() == 1);
  const Trace& trace = traces.front();
  CHECK(trace.stream_id == "u7");
  CHECK(trace.num_frames == 2);
  CHECK(trace.frame_period_ms == Rat(25, 2));
  CHECK(validate_trace(trace).empty());
  REQUIRE(trace.delays().size() == 1);
  CHECK(trace.delays().front().d_ca_ms == Rat(125, 4));
  CHECK(trace.tokens() == std::vector<std::string>{"hallo"});

  // Field order and number rendering are part of the format.
  std::string line = io::trace_to_line(trace);
  CHECK(line.find(R"({"id":"u7","events":[{"t":"R","frame":1})") == 0);
  CHECK(line.find(R"({"t":"W","token":"hallo","n":2,"d_nca":25.0,"d_ca":31.25})") !=
        std::string::npos);
}

TEST_CASE("trace parsing rejects WRITE events without CA delays") {
  TempDir dir;
  auto path = dir.file("noca.jsonl");
  put(path,
      R"({"id":"u0","events":[{"t":"R","frame":1},{"t":"W","token":"a","n":1,"d_nca":10.0}],)"
      R"("config":{"policy":"wait-k","params":"k=1","pre_decision":"fixed","step":"10.000",)"
      R"("agent":"oracle","cost_model":"incremental:0.000,0.000,0.000","subsample_factor":1,)"
      R"("num_frames":1,"frame_period_ms":10.0}})"
      "\n");
  CHECK_THROWS_AS(io::load_traces(path), std::runtime_error);
}

TEST_CASE("report rendering is deterministic and sorted") {
  RefMap refs = {{"u0", {"der", "kleine", "hund", "bellt"}}};
  std::vector<Trace> traces = {sample_trace()};
  auto rows = io::summarize_trace_files(traces, refs);
  std::string once = io::render_report_csv(rows);
  std::string twice = io::render_report_csv(io::summarize_trace_files(traces, refs));
  CHECK(once == twice);
  CHECK(once.find("policy,params,pre_decision,step,bleu,al_nca_ms,al_ca_ms,mean_ca_gap_ms,"
                  "ref_fallback") == 0);
  CHECK(once.find("wait-k,k=2,fixed,40.000,100.000,") != std::string::npos);
}

TEST_CASE("report rows order k=10 after k=9") {
  CHECK(io::natural_less("k=9", "k=10"));
  CHECK_FALSE(io::natural_less("k=10", "k=9"));
  CHECK(io::natural_less("k=1", "k=2"));
  CHECK(io::natural_less("heads=waitk:2", "heads=waitk:10"));
  CHECK(io::natural_less("120.000", "560.000"));
}

TEST_CASE("summaries without references flag the fallback") {
  std::vector<Trace> traces = {sample_trace()};
  auto rows = io::summarize_trace_files(traces, RefMap{});
  REQUIRE(rows.size() == 1);
  CHECK(rows.front().ref_fallback);
  CHECK_FALSE(rows.front().has_bleu);
  std::string csv = io::render_report_csv(rows);
  CHECK(csv.find("fixed,40.000,,") != std::string::npos);  // empty BLEU column
  CHECK(csv.find(",1\n") != std::string::npos);            // fallback flag set

  RefMap wrong = {{"other", {"x"}}};
  CHECK_THROWS_AS(io::summarize_trace_files(traces, wrong), std::runtime_error);
}

TEST_CASE("cost model strings parse and reject junk") {
  auto zero = io::parse_cost_model("incremental");
  CHECK(zero.encoder_mode == EncoderMode::incremental);
  CHECK(zero.cost_per_state_ms == Rat(0));

  auto recompute = io::parse_cost_model("recompute:2");
  CHECK(recompute.encoder_mode == EncoderMode::recompute);
  CHECK(recompute.cost_per_state_ms == Rat(2));

  auto full = io::parse_cost_model("incremental:1.5,0.25,3");
  CHECK(full.cost_per_state_ms == Rat(3, 2));
  CHECK(full.cost_per_decision_ms == Rat(1, 4));
  CHECK(full.cost_per_token_ms == Rat(3));

  CHECK(io::parse_cost_model("wall").wall_clock);
  CHECK(to_string(io::parse_cost_model("wall")) == "wall");

  CHECK_THROWS_AS(io::parse_cost_model("gpu:1"), std::invalid_argument);
  CHECK_THROWS_AS(io::parse_cost_model("incremental:1,2,3,4"), std::invalid_argument);
  CHECK_THROWS_AS(io::parse_cost_model("incremental:-1"), std::invalid_argument);
  CHECK_THROWS_AS(io::parse_cost_model("wall:1"), std::invalid_argument);
}

TEST_CASE("grid strings parse ranges and lists") {
  CHECK(io::parse_int_grid("1..4") == std::vector<std::int64_t>{1, 2, 3, 4});
  CHECK(io::parse_int_grid("5..5") == std::vector<std::int64_t>{5});
  CHECK(io::parse_int_grid("1,3,9") == std::vector<std::int64_t>{1, 3, 9});
  CHECK(io::parse_step_grid("120,280,560") == std::vector<Rat>{Rat(120), Rat(280), Rat(560)});
  CHECK(io::parse_step_grid("12.5") == std::vector<Rat>{Rat(25, 2)});
  CHECK_THROWS_AS(io::parse_int_grid("9..1"), std::invalid_argument);
}

TEST_CASE("decimal and time parsing is exact") {
  CHECK(rat_from_decimal("280") == Rat(280));
  CHECK(rat_from_decimal("0.001") == Rat(1, 1000));
  CHECK(rat_from_decimal("-3.5") == Rat(-7, 2));
  CHECK_THROWS_AS(rat_from_decimal("abc"), std::invalid_argument);
  CHECK_THROWS_AS(rat_from_decimal("1.2.3"), std::invalid_argument);

  CHECK(rat_ms_from_double(12.5) == Rat(25, 2));
  CHECK(rat_ms_from_double(10.0) == Rat(10));
  CHECK_THROWS_AS(rat_ms_from_double(0.0001234), std::invalid_argument);

  CHECK(format_fixed(Rat(280)) == "280.000");
  CHECK(format_fixed(Rat(25, 2)) == "12.500");
  CHECK(format_fixed(Rat(-1, 3)) == "-0.333");
  CHECK(format_fixed(Rat(1, 1600)) == "0.001");  // 0.000625 rounds half up at 3 decimals
}
