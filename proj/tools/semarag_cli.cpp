// semarag: build an index, run a benchmark, ask one question, or recompute a
// summary from stored records.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "semarag/config.hpp"
#include "semarag/errors.hpp"
#include "semarag/harness.hpp"

namespace fs = std::filesystem;
using namespace semarag;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<int> t_max;
  std::optional<std::size_t> k;
  std::optional<std::size_t> m;
  std::optional<std::string> backend;
  std::optional<std::string> mock_script;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> cache_dir;
  bool skip_interpreter = false;
  bool single_round = false;
  bool skip_adjudication = false;
  std::string clock = "auto";
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--t-max", o.t_max, "maximum explorer rounds");
  cmd->add_option("--k", o.k, "documents retrieved per query");
  cmd->add_option("--m", o.m, "maximum follow-up queries per round");
  cmd->add_option("--backend", o.backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--mock-script", o.mock_script, "JSONL script for the mock backend")->check(CLI::ExistingFile);
  cmd->add_option("--workers", o.workers, "questions processed in parallel");
  cmd->add_option("--seed", o.seed, "sampling seed forwarded to the backend");
  cmd->add_option("--cache-dir", o.cache_dir, "enable the on-disk completion cache");
  cmd->add_flag("--no-interpreter", o.skip_interpreter, "ablation: raw stem as the first query");
  cmd->add_flag("--single-round", o.single_round, "ablation: one explorer round");
  cmd->add_flag("--no-adjudication", o.skip_adjudication, "ablation: answer from the evidence directly");
  cmd->add_option("--clock", o.clock, "auto, steady or frozen (auto freezes time under the mock backend)")
      ->check(CLI::IsMember({"auto", "steady", "frozen"}));
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config_file(o.config_path);
  if (o.t_max) cfg.t_max = *o.t_max;
  if (o.k) cfg.k = *o.k;
  if (o.m) cfg.m = *o.m;
  if (o.backend) cfg.backend.kind = *o.backend == "http" ? BackendKind::http : BackendKind::mock;
  if (o.mock_script) cfg.backend.mock_script = *o.mock_script;
  if (o.workers) cfg.workers = *o.workers;
  if (o.seed) cfg.seed = *o.seed;
  if (o.cache_dir) {
    cfg.cache.enabled = true;
    cfg.cache.dir = *o.cache_dir;
  }
  cfg.ablation.skip_interpreter = cfg.ablation.skip_interpreter || o.skip_interpreter;
  cfg.ablation.single_round = cfg.ablation.single_round || o.single_round;
  cfg.ablation.skip_adjudication = cfg.ablation.skip_adjudication || o.skip_adjudication;
  validate_config(cfg);
  return cfg;
}

Clock resolve_clock(const std::string& name, const RunConfig& cfg) {
  if (name == "frozen") return frozen_clock();
  if (name == "steady") return steady_clock_ms();
  return cfg.backend.kind == BackendKind::mock ? frozen_clock() : steady_clock_ms();
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("semarag"));

  CLI::App app{"Schema-guided iterative retrieval and adjudication for medical QA"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "errors only");

  // ingest ------------------------------------------------------------------
  auto* ingest_cmd = app.add_subcommand("ingest", "chunk and embed corpus files into an index directory");
  std::vector<std::string> ingest_corpus;
  std::string ingest_index;
  std::string ingest_config;
  ingest_cmd->add_option("--corpus", ingest_corpus, "corpus JSONL files")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--index", ingest_index, "output index directory")->required();
  ingest_cmd->add_option("--config", ingest_config, "JSON config file (embedder, chunking)")
      ->check(CLI::ExistingFile);

  // run ---------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "evaluate a dataset and write records and a summary");
  Overrides run_o;
  std::string run_dataset, run_kind = "mcq4", run_index, run_out = "out";
  std::vector<std::string> run_corpus;
  run_cmd->add_option("--dataset", run_dataset, "dataset JSONL")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--task-kind", run_kind, "mcq4, yn or ynm")->check(CLI::IsMember({"mcq4", "yn", "ynm"}));
  run_cmd->add_option("--index", run_index, "index directory");
  run_cmd->add_option("--corpus", run_corpus, "corpus JSONL files, ingested when no index exists")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run_out, "output directory");
  add_config_flags(run_cmd, run_o);

  // ask ---------------------------------------------------------------------
  auto* ask_cmd = app.add_subcommand("ask", "answer one question and print its full record");
  Overrides ask_o;
  std::string ask_question, ask_kind = "mcq4", ask_index, ask_dataset, ask_id;
  std::vector<std::string> ask_options, ask_corpus;
  ask_cmd->add_option("--question", ask_question, "question stem");
  ask_cmd->add_option("--option", ask_options, "LABEL=text, repeatable");
  ask_cmd->add_option("--dataset", ask_dataset, "take the question from this dataset")->check(CLI::ExistingFile);
  ask_cmd->add_option("--id", ask_id, "question id within --dataset");
  ask_cmd->add_option("--task-kind", ask_kind, "mcq4, yn or ynm")->check(CLI::IsMember({"mcq4", "yn", "ynm"}));
  ask_cmd->add_option("--index", ask_index, "index directory");
  ask_cmd->add_option("--corpus", ask_corpus, "corpus JSONL files, ingested when no index exists")
      ->check(CLI::ExistingFile);
  add_config_flags(ask_cmd, ask_o);

  // report ------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "recompute the summary from a records file");
  std::string report_records, report_out;
  report_cmd->add_option("--records", report_records, "records.jsonl")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "write summary.json and summary.txt here");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (*ingest_cmd) {
      RunConfig cfg = ingest_config.empty() ? RunConfig{} : load_config_file(ingest_config);
      auto embedder = make_embedder(cfg.embedder);
      const auto files = to_paths(ingest_corpus);
      auto index = ingest(files, cfg.chunking, *embedder);
      index.save(ingest_index);
      std::cout << "indexed " << index.size() << " chunks into " << ingest_index << " (" << index.content_hash()
                << ")\n";
      return 0;
    }

    if (*run_cmd) {
      const RunConfig cfg = resolve_config(run_o);
      const auto data = load_dataset(run_dataset, parse_task_kind(run_kind));
      const auto corpus = to_paths(run_corpus);
      auto engine = make_engine(cfg, run_index, corpus);
      Pipeline pipeline(cfg, engine.gateway, engine.retriever, resolve_clock(run_o.clock, cfg));
      auto result = run_benchmark(data.questions, pipeline, cfg.workers);
      write_run(run_out, result);
      std::cout << format_summary(result.metrics);
      return 0;
    }

    if (*ask_cmd) {
      const RunConfig cfg = resolve_config(ask_o);
      const auto kind = parse_task_kind(ask_kind);
      Question q;
      if (!ask_dataset.empty()) {
        const auto data = load_dataset(ask_dataset, kind);
        auto it = std::find_if(data.questions.begin(), data.questions.end(),
                               [&](const Question& x) { return ask_id.empty() || x.id == ask_id; });
        if (it == data.questions.end()) throw DatasetError("no question '" + ask_id + "' in " + ask_dataset);
        q = *it;
      } else {
        if (ask_question.empty()) throw ConfigError("ask needs --question or --dataset");
        q.id = ask_id.empty() ? "ask" : ask_id;
        q.stem = ask_question;
        q.task_kind = kind;
        if (ask_options.empty()) {
          for (const auto& l : label_set(kind)) q.options.push_back({l, ""});
        }
        for (const auto& entry : ask_options) {
          const auto eq = entry.find('=');
          if (eq == std::string::npos) throw ConfigError("--option expects LABEL=text, got '" + entry + "'");
          q.options.push_back({entry.substr(0, eq), entry.substr(eq + 1)});
        }
        q = validate_question(std::move(q));
      }
      const auto corpus = to_paths(ask_corpus);
      auto engine = make_engine(cfg, ask_index, corpus);
      Pipeline pipeline(cfg, engine.gateway, engine.retriever, resolve_clock(ask_o.clock, cfg));
      const auto record = pipeline.run(q);
      std::cout << record_to_json(record).dump(2) << "\n";
      std::cout << "Final Answer: " << record.prediction.value_or("(abstained)") << "\n";
      return record.error ? 1 : 0;
    }

    if (*report_cmd) {
      const auto metrics = summarize_records(report_records);
      if (!report_out.empty()) {
        BenchmarkResult result{metrics, read_records(report_records)};
        write_run(report_out, result);
      }
      std::cout << format_summary(metrics);
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
