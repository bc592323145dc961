#pragma once

// Command-line front end. Kept in a header so tests can drive run_cli()
// in-process.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "cotprobe/cotprobe.hpp"
#include "cotprobe/remote_judge.hpp"

namespace cotprobe::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> parse_thresholds(const std::string& spec) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string::npos) end = spec.size();
    const std::string item = spec.substr(start, end - start);
    if (!item.empty()) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size())
        throw Error(ErrorCode::kConfigError, "bad threshold '" + item + "'");
      out.push_back(v);
    }
    start = end + 1;
  }
  return out;
}

inline std::size_t parse_count(const std::string& item) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
  if (ec != std::errc() || ptr != item.data() + item.size() || v == 0)
    throw Error(ErrorCode::kConfigError, "bad chunk count '" + item + "'");
  return v;
}

/// "1..10" or "1,3,5".
inline std::vector<std::size_t> parse_static(const std::string& spec) {
  std::vector<std::size_t> out;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const std::size_t lo = parse_count(spec.substr(0, dots));
    const std::size_t hi = parse_count(spec.substr(dots + 2));
    if (hi < lo) throw Error(ErrorCode::kConfigError, "empty static range '" + spec + "'");
    for (std::size_t m = lo; m <= hi; ++m) out.push_back(m);
    return out;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string::npos) end = spec.size();
    if (end > start) out.push_back(parse_count(spec.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

inline fs::path sibling(const fs::path& path, const std::string& suffix) {
  auto p = path;
  p.replace_extension();
  p += suffix;
  return p;
}

inline ParserConfig load_keywords(const std::string& path) {
  if (path.empty()) return {};
  const auto doc = read_json(path);
  if (doc.is_array()) return parser_config_from_json(nlohmann::json{{"keywords", doc}});
  return parser_config_from_json(doc);
}

inline Alignment alignment_for(DatasetMode mode) {
  switch (mode) {
    case DatasetMode::kIntermediate: return Alignment::kChunk;
    case DatasetMode::kLookahead: return Alignment::kParagraph;
    case DatasetMode::kFinal: return Alignment::kFinal;
  }
  return Alignment::kChunk;
}

inline nlohmann::ordered_json run_summary(const TrainedProbe& run) {
  nlohmann::ordered_json j;
  j["run_index"] = run.run_index;
  j["config"] = to_json(run.config);
  j["val_accuracy"] = run.val_accuracy;
  j["val_loss"] = run.val_loss;
  j["best_epoch"] = run.best_epoch;
  j["epochs_run"] = run.epochs_run;
  j["imbalance_weight"] = run.imbalance_weight;
  return j;
}

inline nlohmann::ordered_json stats_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["n_examples"] = s.n_examples;
  j["n_chunks"] = s.n_chunks;
  j["positive_fraction"] = s.positive_fraction;
  j["mean_chunk_token_length"] = s.mean_chunk_token_length;
  return j;
}

// --- subcommand bodies -------------------------------------------------------

struct ParseArgs {
  std::string traces, out, keywords;
  bool skip_invalid = false;
};

inline void cmd_parse(const ParseArgs& a, std::ostream& out) {
  const ParserConfig config = load_keywords(a.keywords);
  auto traces = read_traces(a.traces);
  std::vector<ReasoningTrace> kept;
  std::size_t recovered_tokens = 0, skipped = 0;
  for (auto& t : traces) {
    std::vector<RawChunk> chunks;
    try {
      chunks = segment_trace(t.trace_text, config);
    } catch (const Error& e) {
      if (!a.skip_invalid) throw Error(e.code(), "trace '" + t.id + "': " + e.what());
      warn("skipping trace '" + t.id + "': " + e.what());
      ++skipped;
      continue;
    }
    // Token counts come from the extraction step, which chunks with the same
    // rule; keep them when the chunking agrees.
    const bool same = t.chunks.size() == chunks.size() &&
                      std::equal(chunks.begin(), chunks.end(), t.chunks.begin(),
                                 [](const RawChunk& r, const TraceChunk& c) { return r.text == c.text; });
    if (!t.chunks.empty() && !same) warn("trace '" + t.id + "': stored chunks differ from parse; token counts reset");
    std::vector<TraceChunk> parsed;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      TraceChunk c{chunks[i].text, chunks[i].paragraph_count, same ? t.chunks[i].token_count : 0, {}, {}};
      recovered_tokens += c.token_count;
      parsed.push_back(std::move(c));
    }
    t.chunks = std::move(parsed);
    if (!t.final_answer) {
      if (auto boxed = extract_last_boxed(extract_post_think(t.trace_text, config))) t.final_answer = *boxed;
    }
    kept.push_back(std::move(t));
  }
  write_traces(kept, a.out);
  std::size_t n_chunks = 0;
  for (const auto& t : kept) n_chunks += t.chunks.size();
  out << nlohmann::ordered_json{{"traces", kept.size()}, {"chunks", n_chunks}, {"skipped", skipped},
                                {"token_count_total", recovered_tokens}}
             .dump()
      << '\n';
}

struct JudgeArgs {
  std::string parsed, out, mode = "rule", task = "boxed";
  std::string endpoint, model, api_key_env = "JUDGE_API_KEY", prompt_file;
  double timeout = 60.0;
  std::size_t jobs = 1;
};

inline void cmd_judge(const JudgeArgs& a, std::ostream& out) {
  auto traces = read_traces(a.parsed);
  const bool remote = a.mode == "remote";
  if (!remote && a.mode != "rule") throw Error(ErrorCode::kConfigError, "--mode must be rule or remote");
  const TaskKind kind = parse_task_kind(a.task);

  JudgeEndpoint endpoint{a.endpoint, a.api_key_env, a.model, a.timeout};
  JudgeTransport transport;
  std::string prompt(kJudgePromptTemplate);
  if (remote) {
    if (a.endpoint.empty()) throw Error(ErrorCode::kConfigError, "--endpoint is required for remote judging");
    transport = http_transport(endpoint);
    if (!a.prompt_file.empty()) prompt = read_text(a.prompt_file);
  }

  std::vector<std::vector<Judgment>> judgments(traces.size());
  std::vector<std::string> errors(traces.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < traces.size(); i = next++) {
      const auto raw = raw_chunks_of(traces[i]);
      if (raw.empty()) continue;
      try {
        judgments[i] = remote ? judge_chunks_remote(raw, traces[i].ground_truth, endpoint, transport, {}, prompt)
                              : judge_chunks_rule(raw, traces[i].ground_truth, kind);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = remote ? std::clamp<std::size_t>(a.jobs, 1, std::max<std::size_t>(traces.size(), 1)) : 1;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t i = 0; i < traces.size(); ++i)
    if (!errors[i].empty()) throw Error(ErrorCode::kDataError, "trace '" + traces[i].id + "': " + errors[i]);

  std::size_t unanswered = 0, labeled = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto& t = traces[i];
    const auto merged = merge_unanswered(raw_chunks_of(t), judgments[i]);
    if (merged.empty()) ++unanswered;
    labeled += merged.size();
    t.chunks = to_trace_chunks(merged);
    if (!t.final_answer_correct && t.final_answer && !normalize_answer(*t.final_answer).empty())
      t.final_answer_correct = answers_match(*t.final_answer, t.ground_truth);
  }
  if (unanswered > 0) warn(std::to_string(unanswered) + " trace(s) contain no intermediate answer");
  write_traces(traces, a.out);
  out << nlohmann::ordered_json{{"traces", traces.size()}, {"labeled_chunks", labeled}, {"unanswered_traces", unanswered}}
             .dump()
      << '\n';
}

struct BuildArgs {
  std::string judged, embeddings, mode = "intermediate", out;
  std::size_t max_problems = 0;
  std::uint64_t seed = 0;
};

inline void cmd_build(const BuildArgs& a, std::ostream& out) {
  const DatasetMode mode = parse_dataset_mode(a.mode);
  const auto traces = read_traces(a.judged);
  const auto file = read_embeddings(a.embeddings);
  if (file.meta.alignment != alignment_for(mode))
    throw Error(ErrorCode::kAlignmentError, std::string("mode ") + to_string(mode) + " needs " +
                                                to_string(alignment_for(mode)) + "-aligned embeddings, got " +
                                                to_string(file.meta.alignment));
  ProbingDataset ds;
  switch (mode) {
    case DatasetMode::kIntermediate: ds = build_probing_dataset(traces, file.matrix, file.meta.index); break;
    case DatasetMode::kLookahead: ds = build_lookahead_dataset(traces, file.matrix, file.meta.index); break;
    case DatasetMode::kFinal: ds = build_final_answer_dataset(traces, file.matrix, file.meta.index); break;
  }
  if (a.max_problems > 0) ds = downsample(ds, a.max_problems, a.seed);
  write_dataset(ds, a.out);
  out << stats_json(dataset_stats(ds)).dump() << '\n';
}

struct StatsArgs {
  std::string dataset, out;
};

inline void cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto j = stats_json(dataset_stats(read_dataset(a.dataset)));
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  out << j.dump() << '\n';
}

struct TrainArgs {
  std::string dataset, config, out;
  std::optional<double> lr, alpha, weight_decay;
  std::optional<std::size_t> hidden, epochs, batch, patience;
  std::uint64_t seed = 0;
};

inline void cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig config;
  if (!a.config.empty()) config = train_config_from_json(read_json(a.config));
  if (a.lr) config.learning_rate = *a.lr;
  if (a.alpha) config.alpha = *a.alpha;
  if (a.weight_decay) config.weight_decay = *a.weight_decay;
  if (a.hidden) config.hidden_size = *a.hidden;
  if (a.epochs) config.max_epochs = *a.epochs;
  if (a.batch) config.batch_size = *a.batch;
  if (a.patience) config.patience = *a.patience;
  config.seed = a.seed;
  config.validate();
  const auto split = split_train_val(read_dataset(a.dataset), a.seed);
  const auto probe = train(split.train, split.val, config);
  write_probe(probe, a.out);
  out << run_summary(probe).dump() << '\n';
}

struct GridArgs {
  std::string dataset, out, space, probe_out;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

inline void cmd_grid(const GridArgs& a, std::ostream& out) {
  const GridSpace space = a.space.empty() ? GridSpace{} : grid_space_from_json(read_json(a.space));
  TrainConfig base;
  const auto result = grid_search(read_dataset(a.dataset), space, a.seed, a.jobs, base);
  const auto& winner = select_probe(result.runs);
  nlohmann::ordered_json report;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : result.runs) runs.push_back(run_summary(r));
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"run_index", f.run_index}, {"config", to_json(f.config)}, {"error", f.message}});
  report["seed"] = a.seed;
  report["runs"] = runs;
  report["failures"] = failures;
  report["selected_run"] = winner.run_index;
  write_text(a.out, report.dump(2) + "\n");
  const fs::path probe_path = a.probe_out.empty() ? sibling(a.out, ".winner.json") : fs::path(a.probe_out);
  write_probe(winner, probe_path);
  out << nlohmann::ordered_json{{"runs", result.runs.size()},
                                {"failures", result.failures.size()},
                                {"selected_run", winner.run_index},
                                {"probe", probe_path.string()}}
             .dump()
      << '\n';
}

struct EvalArgs {
  std::string probe, dataset, report, reliability_csv;
  std::size_t bins = 10;
  double threshold = 0.5;
};

inline void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto probe = read_probe(a.probe);
  const auto ds = read_dataset(a.dataset);
  const auto report = evaluate(score_dataset(probe.params, ds), a.bins, a.threshold);
  const auto j = to_json(report);
  if (!a.report.empty()) write_text(a.report, j.dump(2) + "\n");
  if (!a.reliability_csv.empty()) write_text(a.reliability_csv, reliability_csv(report.reliability));
  out << j.dump() << '\n';
}

struct LookaheadArgs {
  std::string probe, dataset, out, csv;
  std::size_t buckets = 10;
};

inline void cmd_lookahead(const LookaheadArgs& a, std::ostream& out) {
  const auto probe = read_probe(a.probe);
  const auto curve = lookahead_curve(read_dataset(a.dataset), probe.params, a.buckets);
  const auto j = to_json(curve);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  if (!a.csv.empty()) write_text(a.csv, lookahead_csv(curve));
  out << j.dump() << '\n';
}

struct ExitSimArgs {
  std::string probe, traces, embeddings, thresholds = "0.5,0.8,0.85,0.9", statics, out, json;
  std::size_t jobs = 1;
};

/// Pairs judged traces with probe confidences on their chunk embeddings.
inline std::vector<TraceRecord> exit_records(const std::vector<ReasoningTrace>& traces, const EmbeddingFile& file,
                                             const ProbeParams& params) {
  if (file.meta.alignment != Alignment::kChunk)
    throw Error(ErrorCode::kAlignmentError, "exit simulation needs chunk-aligned embeddings");
  // Reuse the intermediate builder for row alignment and validation.
  const auto ds = build_probing_dataset(traces, file.matrix, file.meta.index);
  std::unordered_map<std::string, const ReasoningTrace*> by_id;
  for (const auto& t : traces) by_id.emplace(t.id, &t);

  std::vector<TraceRecord> records;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < ds.size();) {
    const std::string& id = ds.examples[i].trace_id;
    const ReasoningTrace& t = *by_id.at(id);
    TraceRecord rec;
    rec.trace_id = id;
    rec.total_tokens = t.total_tokens;
    std::size_t chunk = 0;
    for (; i < ds.size() && ds.examples[i].trace_id == id; ++i) {
      while (!t.chunks[chunk].labeled()) ++chunk;
      rec.chunks.push_back({forward(params, ds.examples[i].embedding), ds.examples[i].label, t.chunks[chunk].token_count});
      ++chunk;
    }
    const auto final_label = final_answer_label(t);
    if (!final_label) {
      ++skipped;
      continue;
    }
    rec.final_answer_correct = *final_label;
    records.push_back(std::move(rec));
  }
  if (skipped > 0) warn("skipped " + std::to_string(skipped) + " trace(s) without a final answer");
  return records;
}

inline void cmd_exit_sim(const ExitSimArgs& a, std::ostream& out) {
  const auto probe = read_probe(a.probe);
  const auto records = exit_records(read_traces(a.traces), read_embeddings(a.embeddings), probe.params);
  SweepCurve curve{baseline_point(records, a.jobs)};
  const auto thresholds = parse_thresholds(a.thresholds);
  if (!thresholds.empty()) {
    const auto c = sweep(records, thresholds, a.jobs);
    curve.insert(curve.end(), c.begin(), c.end());
  }
  if (!a.statics.empty()) {
    const auto c = sweep_static(records, parse_static(a.statics), a.jobs);
    curve.insert(curve.end(), c.begin(), c.end());
  }
  write_text(a.out, curve_csv(curve));
  const fs::path json_path = a.json.empty() ? sibling(a.out, ".json") : fs::path(a.json);
  write_text(json_path, to_json(curve).dump(2) + "\n");
  out << to_json(curve).dump() << '\n';
}

}  // namespace detail

/// Runs one invocation. Returns 0 on success, 1 on usage errors, 2 on data
/// errors.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Correctness probes over reasoning traces", "cotprobe"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  ParseArgs parse_args;
  auto* parse = app.add_subcommand("parse", "Segment raw traces into chunks");
  parse->add_option("--traces", parse_args.traces, "Input trace JSONL")->required();
  parse->add_option("--out", parse_args.out, "Output parsed JSONL")->required();
  parse->add_option("--keywords", parse_args.keywords, "Parser config JSON or keyword array");
  parse->add_flag("--skip-invalid", parse_args.skip_invalid, "Skip traces that fail to parse");

  JudgeArgs judge_args;
  auto* judge = app.add_subcommand("judge", "Label intermediate answers and merge answer-less chunks");
  judge->add_option("--parsed", judge_args.parsed, "Parsed trace JSONL")->required();
  judge->add_option("--out", judge_args.out, "Output judged JSONL")->required();
  judge->add_option("--mode", judge_args.mode, "rule or remote")->check(CLI::IsMember({"rule", "remote"}));
  judge->add_option("--task", judge_args.task, "Answer format for the rule judge")
      ->check(CLI::IsMember({"boxed", "choice"}));
  judge->add_option("--endpoint", judge_args.endpoint, "Chat-completions base URL");
  judge->add_option("--model", judge_args.model, "Judge model name");
  judge->add_option("--api-key-env", judge_args.api_key_env, "Environment variable holding the API key");
  judge->add_option("--timeout", judge_args.timeout, "Request timeout in seconds");
  judge->add_option("--prompt", judge_args.prompt_file, "Override the evaluation prompt template");
  judge->add_option("--jobs", judge_args.jobs, "Concurrent judge requests");

  BuildArgs build_args;
  auto* build = app.add_subcommand("build", "Assemble a probing dataset");
  build->add_option("--judged", build_args.judged, "Judged trace JSONL")->required();
  build->add_option("--embeddings", build_args.embeddings, "Embedding manifest")->required();
  build->add_option("--mode", build_args.mode, "intermediate, lookahead or final")
      ->check(CLI::IsMember({"intermediate", "lookahead", "final"}));
  build->add_option("--out", build_args.out, "Output dataset manifest")->required();
  build->add_option("--max-problems", build_args.max_problems, "Keep at most this many source problems (0 = all)");
  build->add_option("--seed", build_args.seed, "Seed");

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->add_option("--dataset", stats_args.dataset, "Dataset manifest")->required();
  stats->add_option("--out", stats_args.out, "Write JSON here as well");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one probe on an 8:2 split");
  train_cmd->add_option("--dataset", train_args.dataset, "Dataset manifest")->required();
  train_cmd->add_option("--config", train_args.config, "Train config JSON");
  train_cmd->add_option("--out", train_args.out, "Output probe checkpoint")->required();
  train_cmd->add_option("--lr", train_args.lr, "Learning rate");
  train_cmd->add_option("--alpha", train_args.alpha, "Imbalance weight scale");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "Decoupled weight decay");
  train_cmd->add_option("--hidden", train_args.hidden, "Hidden size d (0 = linear)");
  train_cmd->add_option("--epochs", train_args.epochs, "Maximum epochs");
  train_cmd->add_option("--batch", train_args.batch, "Batch size");
  train_cmd->add_option("--patience", train_args.patience, "Early-stopping patience");
  train_cmd->add_option("--seed", train_args.seed, "Seed");

  GridArgs grid_args;
  auto* grid = app.add_subcommand("grid", "Grid search and probe selection");
  grid->add_option("--dataset", grid_args.dataset, "Dataset manifest")->required();
  grid->add_option("--out", grid_args.out, "Output runs JSON")->required();
  grid->add_option("--space", grid_args.space, "Search space JSON");
  grid->add_option("--probe-out", grid_args.probe_out, "Winner checkpoint path");
  grid->add_option("--seed", grid_args.seed, "Seed");
  grid->add_option("--jobs", grid_args.jobs, "Parallel training runs");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a probe on a dataset");
  eval->add_option("--probe", eval_args.probe, "Probe checkpoint")->required();
  eval->add_option("--dataset", eval_args.dataset, "Dataset manifest")->required();
  eval->add_option("--report", eval_args.report, "Write the JSON report here");
  eval->add_option("--reliability-csv", eval_args.reliability_csv, "Write the reliability table as CSV");
  eval->add_option("--bins", eval_args.bins, "Calibration bins");
  eval->add_option("--threshold", eval_args.threshold, "Decision threshold");

  LookaheadArgs lookahead_args;
  auto* lookahead = app.add_subcommand("lookahead", "Metrics by position within chunks");
  lookahead->add_option("--probe", lookahead_args.probe, "Probe checkpoint")->required();
  lookahead->add_option("--dataset", lookahead_args.dataset, "Look-ahead dataset manifest")->required();
  lookahead->add_option("--buckets", lookahead_args.buckets, "Position buckets");
  lookahead->add_option("--out", lookahead_args.out, "Write JSON here");
  lookahead->add_option("--csv", lookahead_args.csv, "Write CSV here");

  ExitSimArgs exit_args;
  auto* exit_sim = app.add_subcommand("exit-sim", "Simulate early exit over recorded traces");
  exit_sim->add_option("--probe", exit_args.probe, "Probe checkpoint")->required();
  exit_sim->add_option("--traces", exit_args.traces, "Judged trace JSONL")->required();
  exit_sim->add_option("--embeddings", exit_args.embeddings, "Chunk embedding manifest")->required();
  exit_sim->add_option("--thresholds", exit_args.thresholds, "Comma-separated confidence thresholds");
  exit_sim->add_option("--static", exit_args.statics, "Static chunk counts: 1..10 or 1,2,3");
  exit_sim->add_option("--out", exit_args.out, "Output curve CSV")->required();
  exit_sim->add_option("--json", exit_args.json, "JSON mirror path (default: <out>.json)");
  exit_sim->add_option("--jobs", exit_args.jobs, "Parallel workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  set_warnings_enabled(!quiet);
  try {
    if (*parse) cmd_parse(parse_args, out);
    else if (*judge) cmd_judge(judge_args, out);
    else if (*build) cmd_build(build_args, out);
    else if (*stats) cmd_stats(stats_args, out);
    else if (*train_cmd) cmd_train(train_args, out);
    else if (*grid) cmd_grid(grid_args, out);
    else if (*eval) cmd_eval(eval_args, out);
    else if (*lookahead) cmd_lookahead(lookahead_args, out);
    else if (*exit_sim) cmd_exit_sim(exit_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfigError ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace cotprobe::cli
