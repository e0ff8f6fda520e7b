// simulst: replay timed source streams through pre-decision modules and
// READ/WRITE policies, record computation-aware and non-computation-aware
// per-token delays, and report BLEU / average-lagging trade-offs.
//
//   simulst run    --manifest m.jsonl --refs r.tsv --policy wait-k --k 3
//                  --pre-decision fixed --step-ms 280 --agent oracle
//                  --cost-model recompute:2 --out traces.jsonl
//   simulst report --traces traces.jsonl --refs r.tsv --out report.csv
//   simulst sweep  --manifest m.jsonl --refs r.tsv --policy wait-k
//                  --k-grid 1..10 --step-grid 120,280,560 --agent coverage
//                  --cost-model incremental --out report.csv
//
// SIMULSTREAM_THREADS caps session parallelism (default: logical cores).

#include "simulst/simulst.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace {

using namespace simulst;

struct CommonArgs {
  std::string manifest_path;
  std::string refs_path;
  std::string policy = "wait-k";
  std::int64_t k = 0;
  std::string heads_spec;
  std::string pre_decision = "fixed";
  std::string step_ms;
  std::string alignments_path;
  std::string agent = "oracle";
  std::string placeholder = "<unk>";
  std::string cost_model = "incremental";
  std::string out_path;
  std::int64_t subsample_factor = 4;
  std::int64_t max_tokens = 4096;
  bool bleu_smoothing = false;
};

std::string basename(const std::string& path) {
  auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

MMASpec parse_heads(const std::string& spec) {
  MMASpec mma;
  std::istringstream in(spec);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    if (piece.rfind("waitk:", 0) == 0) {
      mma.heads.push_back(stepwise_from_waitk(std::stoll(piece.substr(6))));
    } else if (piece.rfind("table:", 0) == 0) {
      std::string path = piece.substr(6);
      StepwiseSource head = stepwise_from_table(io::load_stepwise_table(path), Rat(0));
      head.name = "table:" + basename(path);
      mma.heads.push_back(std::move(head));
    } else {
      throw CLI::ValidationError("--heads", "head must be waitk:K or table:PATH, got '" + piece + "'");
    }
  }
  if (mma.heads.empty()) throw CLI::ValidationError("--heads", "no heads given");
  return mma;
}

PolicySpec parse_policy(const CommonArgs& args) {
  if (args.policy == "wait-k") {
    if (!args.heads_spec.empty())
      throw CLI::ValidationError("--heads", "--heads is only valid with --policy mma");
    if (args.k < 1) throw CLI::ValidationError("--k", "--policy wait-k requires --k >= 1");
    return WaitKSpec{args.k};
  }
  if (args.policy == "mma") {
    if (args.k != 0) throw CLI::ValidationError("--k", "--k is only valid with --policy wait-k");
    if (args.heads_spec.empty())
      throw CLI::ValidationError("--heads", "--policy mma requires --heads");
    return parse_heads(args.heads_spec);
  }
  throw CLI::ValidationError("--policy", "policy must be wait-k or mma");
}

void check_pre_decision_flags(const CommonArgs& args, bool step_given) {
  if (args.pre_decision == "fixed") {
    if (!args.alignments_path.empty())
      throw CLI::ValidationError("--alignments", "--alignments is only valid with --pre-decision flexible");
    if (!step_given)
      throw CLI::ValidationError("--step-ms", "--pre-decision fixed requires a step size");
  } else if (args.pre_decision == "flexible") {
    if (step_given)
      throw CLI::ValidationError("--step-ms", "step sizes are only valid with --pre-decision fixed");
    if (args.alignments_path.empty())
      throw CLI::ValidationError("--alignments", "--pre-decision flexible requires --alignments");
  } else {
    throw CLI::ValidationError("--pre-decision", "pre-decision must be fixed or flexible");
  }
}

SessionBlueprint make_blueprint(const CommonArgs& args, const PolicySpec& policy,
                                std::optional<Rat> step) {
  SessionBlueprint blueprint;
  if (step)
    blueprint.pre_decision = *step;
  else
    blueprint.pre_decision = FlexiblePreDecisionSpec{};
  blueprint.policy = policy;
  blueprint.cost_model = io::parse_cost_model(args.cost_model);
  if (args.agent == "oracle")
    blueprint.agent_kind = AgentKind::oracle;
  else if (args.agent == "coverage")
    blueprint.agent_kind = AgentKind::coverage;
  else
    throw CLI::ValidationError("--agent", "agent must be oracle or coverage");
  blueprint.placeholder = args.placeholder;
  blueprint.subsample_factor = args.subsample_factor;
  blueprint.max_tokens = args.max_tokens;
  return blueprint;
}

std::vector<CorpusEntry> load_corpus(const CommonArgs& args) {
  std::vector<CorpusEntry> entries;
  for (auto& manifest_entry : io::load_manifest(args.manifest_path))
    entries.push_back({std::move(manifest_entry.stream), manifest_entry.alignment_id});
  return entries;
}

int cmd_run(const CommonArgs& args) {
  check_pre_decision_flags(args, !args.step_ms.empty());
  PolicySpec policy = parse_policy(args);
  std::optional<Rat> step;
  if (!args.step_ms.empty()) step = rat_from_decimal(args.step_ms);
  SessionBlueprint blueprint = make_blueprint(args, policy, step);
  std::vector<CorpusEntry> entries = load_corpus(args);
  RefMap refs = io::load_refs(args.refs_path);
  AlignmentMap alignments;
  if (!args.alignments_path.empty()) alignments = io::load_alignments(args.alignments_path);
  std::vector<Trace> traces = run_corpus(entries, blueprint, refs, alignments);
  io::write_traces(args.out_path, traces);
  return 0;
}

int cmd_report(const std::vector<std::string>& trace_paths, const std::string& refs_path,
               const std::string& out_path, bool bleu_smoothing) {
  std::vector<Trace> traces;
  for (const auto& path : trace_paths)
    for (auto& trace : io::load_traces(path)) traces.push_back(std::move(trace));
  RefMap refs;
  if (!refs_path.empty()) refs = io::load_refs(refs_path);
  auto rows = io::summarize_trace_files(traces, refs, 4, bleu_smoothing);
  io::detail::write_file(out_path, io::render_report_csv(rows, bleu_smoothing));
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& k_grid, const std::string& step_grid) {
  check_pre_decision_flags(args, !step_grid.empty());
  std::vector<Rat> steps;
  if (!step_grid.empty()) steps = io::parse_step_grid(step_grid);

  std::vector<PolicySpec> policies;
  if (args.policy == "wait-k") {
    if (k_grid.empty()) throw CLI::ValidationError("--k-grid", "--policy wait-k requires --k-grid");
    for (std::int64_t k : io::parse_int_grid(k_grid)) {
      if (k < 1) throw CLI::ValidationError("--k-grid", "k values must be >= 1");
      policies.push_back(WaitKSpec{k});
    }
  } else {
    if (!k_grid.empty())
      throw CLI::ValidationError("--k-grid", "--k-grid is only valid with --policy wait-k");
    policies.push_back(parse_policy(args));
  }

  std::vector<SessionBlueprint> blueprints;
  for (const auto& policy : policies) {
    if (steps.empty()) {
      blueprints.push_back(make_blueprint(args, policy, std::nullopt));
    } else {
      for (const auto& step : steps) blueprints.push_back(make_blueprint(args, policy, step));
    }
  }

  std::vector<CorpusEntry> entries = load_corpus(args);
  RefMap refs = io::load_refs(args.refs_path);
  AlignmentMap alignments;
  if (!args.alignments_path.empty()) alignments = io::load_alignments(args.alignments_path);
  auto rows = run_sweep(entries, blueprints, refs, alignments, 0, 4, args.bleu_smoothing);
  io::sort_rows(rows);
  io::detail::write_file(args.out_path, io::render_report_csv(rows, args.bleu_smoothing));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous speech-translation policy simulator and evaluation toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string k_grid;
  std::string step_grid;
  std::vector<std::string> trace_paths;
  std::string report_refs;

  auto add_common = [&](CLI::App* cmd, bool sweep) {
    cmd->add_option("--manifest", args.manifest_path, "stream manifest (jsonl)")->required();
    cmd->add_option("--refs", args.refs_path, "references (tsv id<TAB>text)")->required();
    cmd->add_option("--policy", args.policy, "wait-k | mma");
    cmd->add_option("--heads", args.heads_spec, "mma heads, e.g. waitk:2,waitk:4 or table:PATH");
    cmd->add_option("--pre-decision", args.pre_decision, "fixed | flexible");
    cmd->add_option("--alignments", args.alignments_path, "alignments (jsonl), flexible mode");
    cmd->add_option("--agent", args.agent, "oracle | coverage");
    cmd->add_option("--placeholder", args.placeholder, "coverage agent placeholder token");
    cmd->add_option("--cost-model", args.cost_model,
                    "incremental|recompute[:state_ms[,decision_ms[,token_ms]]] or wall");
    cmd->add_option("--subsample", args.subsample_factor, "encoder subsampling factor r_e")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-tokens", args.max_tokens, "per-session token cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", args.out_path, sweep ? "output CSV" : "output trace file")->required();
    if (sweep) {
      cmd->add_option("--k-grid", k_grid, "wait-k grid, e.g. 1..10 or 1,3,5");
      cmd->add_option("--step-grid", step_grid, "fixed step grid in ms, e.g. 120,280,560");
      cmd->add_flag("--bleu-smoothing", args.bleu_smoothing, "add-one smoothing on orders >= 2");
    } else {
      cmd->add_option("--k", args.k, "wait-k parameter");
      cmd->add_option("--step-ms", args.step_ms, "fixed pre-decision step in ms");
    }
  };

  CLI::App* run = app.add_subcommand("run", "simulate sessions and write a trace file");
  add_common(run, false);

  CLI::App* report = app.add_subcommand("report", "aggregate trace files into a trade-off CSV");
  report->add_option("--traces", trace_paths, "trace files")->required()->expected(-1);
  report->add_option("--refs", report_refs, "references (tsv); omit for |Y*|=|Y| fallback");
  report->add_option("--out", args.out_path, "output CSV")->required();
  report->add_flag("--bleu-smoothing", args.bleu_smoothing, "add-one smoothing on orders >= 2");

  CLI::App* sweep = app.add_subcommand("sweep", "run a config grid and report it in one step");
  add_common(sweep, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(args);
    if (report->parsed())
      return cmd_report(trace_paths, report_refs, args.out_path, args.bleu_smoothing);
    return cmd_sweep(args, k_grid, step_grid);
  } catch (const std::exception& e) {
    std::cerr << "simulst: error: " << e.what() << "\n";
    return 1;
  }
}
