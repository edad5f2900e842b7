// Copyright 2026 The evchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "evchain/cli.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "evchain/answerer.h"
#include "evchain/embedder.h"
#include "evchain/evalkit.h"
#include "evchain/nscl.h"
#include "evchain/parallel.h"
#include "evchain/refiner.h"
#include "evchain/screener.h"
#include "json.hpp"

namespace evchain {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fingerprint(const std::string& text) { return hex64(hash64(text, 0)); }

}  // namespace

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file \"" + path + "\"");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fingerprint(bytes);
}

ArtifactPaths artifact_paths(const RunConfig& cfg, const std::string& corpus_digest) {
  const json full = json::parse(cfg.to_json());
  const std::size_t n_train = cfg.train_instances ? static_cast<std::size_t>(*cfg.train_instances)
                                                  : std::size_t(-1);
  const std::string screener_key = fingerprint(
      corpus_digest + "|" + std::to_string(n_train) + "|" + full["embedder"].dump() +
      full["screener_train"].dump() + full["surface"].dump());
  const std::string screens_key = fingerprint(screener_key + "|" + std::to_string(cfg.top_k));
  const std::string refiner_key = fingerprint(screens_key + "|" + full["scorer"].dump() +
                                              full["refiner_train"].dump());
  const fs::path dir(cfg.model_dir);
  return ArtifactPaths{
      (dir / ("screener-" + screener_key + ".bin")).string(),
      (dir / ("screener-" + screener_key + ".loss.csv")).string(),
      (dir / ("screens-" + screens_key + ".jsonl")).string(),
      (dir / ("refiner-" + refiner_key + ".bin")).string(),
      (dir / ("refiner-" + refiner_key + ".loss.csv")).string(),
  };
}

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool eism_only = false;
  std::optional<int> jobs;
};

class Session {
 public:
  Session(const GlobalFlags& flags, std::ostream& out) : out_(out) {
    if (flags.config_path.empty()) throw ConfigError("--config is required for this command");
    cfg_ = load_run_config(flags.config_path);
    if (flags.seed) {
      cfg_.seed = *flags.seed;
      cfg_.screener_train.seed = *flags.seed;
      cfg_.refiner_train.seed = *flags.seed + 1;
    }
    if (!flags.out_dir.empty()) cfg_.out_dir = flags.out_dir;
    if (flags.jobs) cfg_.jobs = *flags.jobs;
    cfg_.validate();
    if (cfg_.corpus_path.empty()) throw ConfigError("config has no corpus_path");
    digest_ = file_digest(cfg_.corpus_path);
    corpus_.emplace(ingest_file(cfg_.corpus_path));
    paths_ = artifact_paths(cfg_, digest_);
  }

  const RunConfig& cfg() const { return cfg_; }
  const Corpus& corpus() const { return *corpus_; }
  const ArtifactPaths& paths() const { return paths_; }
  std::ostream& out() { return out_; }

  DualEncoder load_screener() const {
    if (!fs::exists(paths_.screener))
      throw MissingArtifact("no trained screener at " + paths_.screener +
                            "; run `evchain train screener --config ...` first");
    return dual_encoder_from_file(load_model_file(paths_.screener));
  }

  PairScorer load_refiner() const {
    if (!fs::exists(paths_.refiner))
      throw MissingArtifact("no trained refiner at " + paths_.refiner +
                            "; run `evchain train refiner --config ...` first");
    return pair_scorer_from_file(load_model_file(paths_.refiner));
  }

  std::vector<ScreenResult> screen_all(const DualEncoder& enc,
                                       std::span<const QAInstance> instances) const {
    std::vector<ScreenResult> results(instances.size());
    parallel_for(instances.size(), cfg_.jobs, [&](std::size_t i) {
      const auto pool = corpus_->pool_of(instances[i]);
      results[i] = screen(enc, instances[i].question, pool, cfg_.top_k, cfg_.surface,
                          instances[i].qid);
    });
    return results;
  }

  /// Full pipeline (or the screening-only path) over one split, sorted by qid.
  std::vector<std::pair<std::string, std::vector<std::string>>> retrieve(
      std::span<const QAInstance> instances, bool eism_only) const {
    const DualEncoder enc = load_screener();
    std::optional<PairScorer> scorer;
    if (!eism_only) scorer = load_refiner();
    const auto screens = screen_all(enc, instances);
    std::vector<std::pair<std::string, std::vector<std::string>>> out(instances.size());
    parallel_for(instances.size(), cfg_.jobs, [&](std::size_t i) {
      out[i].first = instances[i].qid;
      out[i].second = eism_only ? eism_only_select(screens[i], cfg_.eism_gap)
                                : refine(*scorer, instances[i].question, screens[i], *corpus_,
                                         cfg_.refine, cfg_.surface);
    });
    std::sort(out.begin(), out.end());
    return out;
  }

  fs::path out_path(const std::string& name) const {
    fs::create_directories(cfg_.out_dir);
    return fs::path(cfg_.out_dir) / name;
  }

 private:
  std::ostream& out_;
  RunConfig cfg_;
  std::string digest_;
  std::optional<Corpus> corpus_;
  ArtifactPaths paths_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

int cmd_gen_synth(const GlobalFlags& flags, SynthConfig synth, const std::string& output,
                  std::ostream& out) {
  if (flags.seed) synth.seed = *flags.seed;
  try {
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const Corpus corpus = gen_synthetic(synth);
  ensure_parent(output);
  export_jsonl_file(corpus, output);
  out << "wrote " << corpus.instances().size() << " instances and " << corpus.sources().size()
      << " sources to " << output << "\n";
  return kExitOk;
}

int cmd_ingest(const std::string& in_path, const std::string& out_path, std::ostream& out) {
  const Corpus corpus = ingest_file(in_path);
  ensure_parent(out_path);
  export_jsonl_file(corpus, out_path);
  std::map<Modality, std::size_t> counts;
  for (const auto& s : corpus.sources()) ++counts[s.modality];
  std::size_t multi = 0;
  for (const auto& inst : corpus.instances()) multi += inst.gold_ids.size() > 1 ? 1 : 0;
  out << "sources: " << corpus.sources().size() << "\n";
  for (Modality m : {Modality::kText, Modality::kImage, Modality::kTable}) {
    out << "  " << modality_name(m) << ": " << counts[m] << "\n";
  }
  out << "instances: " << corpus.instances().size() << " (multi-gold: " << multi << ")\n";
  return kExitOk;
}

int cmd_train(Session& s, const std::string& stage) {
  const RunConfig& cfg = s.cfg();
  const auto train = split_instances(s.corpus(), cfg, Split::kTrain);
  fs::create_directories(cfg.model_dir);
  if (stage == "screener") {
    const FeatureHasher hasher(cfg.embedder.dim, cfg.embedder.ngram_orders,
                               cfg.embedder.hash_seed);
    DualEncoder init = make_dual_encoder(hasher, cfg.embedder.dim_out, cfg.embedder.init_seed);
    auto result = train_screener(s.corpus(), train, cfg.screener_train, std::move(init),
                                 cfg.surface);
    save_model_file(to_model_file(result.encoders), s.paths().screener);
    std::ofstream csv(s.paths().screener_loss, std::ios::binary | std::ios::trunc);
    write_loss_csv(result.history, csv);
    s.out() << "screener: " << result.history.size() << " steps, model " << s.paths().screener
            << "\n";
    return kExitOk;
  }
  if (stage == "refiner") {
    if (!fs::exists(s.paths().screens))
      throw MissingArtifact("no screen cache at " + s.paths().screens +
                            "; run `evchain screen --config ...` after training the screener");
    std::ifstream in(s.paths().screens);
    std::map<std::string, ScreenResult> screens;
    for (auto& r : read_screens_jsonl(in)) screens.emplace(r.qid, std::move(r));
    const FeatureHasher hasher(cfg.embedder.dim, cfg.embedder.ngram_orders, cfg.scorer.hash_seed);
    auto result = train_refiner(s.corpus(), train, screens, cfg.refiner_train,
                                cfg.refiner_options,
                                PairScorer::random(hasher, cfg.scorer.hidden, cfg.scorer.init_seed),
                                cfg.surface);
    save_model_file(to_model_file(result.scorer), s.paths().refiner);
    std::ofstream csv(s.paths().refiner_loss, std::ios::binary | std::ios::trunc);
    write_loss_csv(result.history, csv);
    s.out() << "refiner: " << result.history.size() << " steps, model " << s.paths().refiner
            << "\n";
    return kExitOk;
  }
  throw ConfigError("unknown training stage \"" + stage + "\" (expected screener or refiner)");
}

int cmd_screen(Session& s) {
  const DualEncoder enc = s.load_screener();
  const auto results = s.screen_all(enc, s.corpus().instances());
  std::ofstream out(s.paths().screens, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + s.paths().screens);
  write_screens_jsonl(results, out);
  s.out() << "screened " << results.size() << " instances into " << s.paths().screens << "\n";
  return kExitOk;
}

std::string retrieval_suffix(Split split, bool eism_only) {
  return split_name(split) + (eism_only ? "-eism" : "");
}

int cmd_retrieve(Session& s, Split split, bool eism_only) {
  const auto instances = split_instances(s.corpus(), s.cfg(), split);
  const auto retrieved = s.retrieve(instances, eism_only);
  std::ostringstream jsonl;
  std::map<std::string, std::vector<std::string>> by_qid;
  for (const auto& [qid, ids] : retrieved) {
    ordered_json rec;
    rec["qid"] = qid;
    rec["retrieved"] = ids;
    jsonl << rec.dump() << "\n";
    by_qid[qid] = ids;
  }
  const std::string suffix = retrieval_suffix(split, eism_only);
  write_text(s.out_path("retrieval-" + suffix + ".jsonl"), jsonl.str());
  const RetrievalReport report = make_retrieval_report(by_qid, instances);
  write_text(s.out_path("retrieval_report-" + suffix + ".json"), to_json(report) + "\n");
  char line[128];
  std::snprintf(line, sizeof line, "retrieval %s: %zu instances, mean P %.4f R %.4f F1 %.4f\n",
                suffix.c_str(), instances.size(), report.mean.precision, report.mean.recall,
                report.mean.f1);
  s.out() << line;
  return kExitOk;
}

int cmd_answer(Session& s, Split split, bool eism_only) {
  const RunConfig& cfg = s.cfg();
  const auto instances = split_instances(s.corpus(), cfg, split);
  const auto retrieved = s.retrieve(instances, eism_only);
  std::map<std::string, const QAInstance*> by_qid;
  for (const auto& inst : instances) by_qid[inst.qid] = &inst;

  std::vector<std::string> lines(retrieved.size());
  parallel_for(retrieved.size(), cfg.jobs, [&](std::size_t i) {
    const auto& [qid, ids] = retrieved[i];
    const QAInstance& inst = *by_qid.at(qid);
    std::vector<const Source*> sources;
    for (const auto& id : ids) sources.push_back(&s.corpus().source(id));
    const AnswerRequest req = assemble_dialogue(inst.question, sources, qid, cfg.surface);
    ordered_json rec;
    rec["qid"] = qid;
    if (cfg.answer.provider == AnswerProvider::kExternal) {
      rec["provider"] = "external";
      try {
        const auto timeout = std::chrono::milliseconds(
            static_cast<std::int64_t>(cfg.answer.timeout_s * 1000.0));
        rec["answer"] = external_answer(req, *cfg.answer.endpoint, timeout).answer;
      } catch (const GeneratorError& e) {
        rec["error"] = e.what();
      }
    } else {
      rec["provider"] = "extractive";
      rec["answer"] = extractive_answer(req, sources, cfg.surface).answer;
    }
    rec["retrieved"] = ids;
    lines[i] = rec.dump();
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  const auto path = s.out_path("answers-" + retrieval_suffix(split, eism_only) + ".jsonl");
  write_text(path, text);
  s.out() << "answered " << lines.size() << " instances into " << path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalFlags& flags, const std::vector<std::string>& preds,
             std::string corpus_path, std::ostream& out) {
  std::string out_dir = flags.out_dir;
  if (corpus_path.empty() || out_dir.empty()) {
    if (flags.config_path.empty())
      throw ConfigError("eval needs --corpus (or --config) to locate gold labels");
    const RunConfig cfg = load_run_config(flags.config_path);
    if (corpus_path.empty()) corpus_path = cfg.corpus_path;
    if (out_dir.empty()) out_dir = cfg.out_dir;
  }
  const Corpus corpus = ingest_file(corpus_path);
  std::map<std::string, std::string> answers;
  std::map<std::string, std::vector<std::string>> retrieved;
  for (const auto& path : preds) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open predictions file \"" + path + "\"");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ConfigError(path + ":" + std::to_string(n) + ": " + e.what());
      }
      const auto qid = rec.at("qid").get<std::string>();
      if (rec.contains("answer") && rec["answer"].is_string())
        answers[qid] = rec["answer"].get<std::string>();
      if (rec.contains("retrieved"))
        retrieved[qid] = rec["retrieved"].get<std::vector<std::string>>();
    }
  }
  fs::create_directories(out_dir);
  if (!answers.empty()) {
    const QAReport qa = make_qa_report(answers, corpus.instances());
    write_text(fs::path(out_dir) / "qa_report.json", to_json(qa) + "\n");
    char line[128];
    std::snprintf(line, sizeof line, "qa: %zu predictions, mean EM %.4f token-F1 %.4f\n",
                  qa.per_qid.size(), qa.mean_em, qa.mean_token_f1);
    out << line;
  }
  if (!retrieved.empty()) {
    const RetrievalReport rr = make_retrieval_report(retrieved, corpus.instances());
    write_text(fs::path(out_dir) / "retrieval_report.json", to_json(rr) + "\n");
    char line[128];
    std::snprintf(line, sizeof line, "retrieval: %zu predictions, mean P %.4f R %.4f F1 %.4f\n",
                  rr.per_qid.size(), rr.mean.precision, rr.mean.recall, rr.mean.f1);
    out << line;
  }
  if (answers.empty() && retrieved.empty())
    throw ConfigError("no predictions found (records need \"answer\" or \"retrieved\")");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidence-chain retrieval and answering", "evchain"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--config", flags.config_path, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--out-dir", flags.out_dir, "directory for outputs and reports");
  app.add_flag("--eism-only", flags.eism_only,
               "select top-1 (+ runner-up within the gap) from screening, skip refinement");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads across instances")
                       ->check(CLI::PositiveNumber);

  SynthConfig synth{2500, 50, 0.5, 2000, 7};
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synth", "write a planted synthetic corpus");
  gen->add_option("--n", synth.n_instances, "number of instances");
  gen->add_option("--pool", synth.pool_size_per_q, "candidate sources per question");
  gen->add_option("--bridge-fraction", synth.bridge_fraction, "share of two-hop instances");
  gen->add_option("--vocab", synth.vocab_size, "vocabulary size");
  gen->add_option("--output", synth_out, "output JSONL path")->required();

  std::string ingest_in, ingest_out;
  auto* ing = app.add_subcommand("ingest", "validate and normalise a corpus file");
  ing->add_option("input", ingest_in, "corpus JSONL")->required();
  ing->add_option("output", ingest_out, "normalised corpus JSONL")->required();

  std::string stage;
  auto* train = app.add_subcommand("train", "train the screener or the refiner");
  train->add_option("stage", stage, "screener | refiner")
      ->required()
      ->check(CLI::IsMember({"screener", "refiner"}));

  auto* scr = app.add_subcommand("screen", "cache top-k screening results for every instance");

  std::string split = "eval";
  auto* ret = app.add_subcommand("retrieve", "run screening + refinement on a split");
  ret->add_option("--split", split, "train | eval | all");
  auto* ans = app.add_subcommand("answer", "retrieve then answer a split");
  ans->add_option("--split", split, "train | eval | all");

  std::vector<std::string> preds;
  std::string eval_corpus;
  auto* ev = app.add_subcommand("eval", "score prediction files against a corpus");
  ev->add_option("--pred", preds, "prediction JSONL (answers and/or retrieval)")->required();
  ev->add_option("--corpus", eval_corpus, "corpus JSONL with gold labels");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) flags.seed = seed;
  if (*jobs_opt) flags.jobs = jobs;

  try {
    if (*gen) return cmd_gen_synth(flags, synth, synth_out, out);
    if (*ing) return cmd_ingest(ingest_in, ingest_out, out);
    if (*ev) return cmd_eval(flags, preds, eval_corpus, out);
    Session session(flags, out);
    if (*train) return cmd_train(session, stage);
    if (*scr) return cmd_screen(session);
    if (*ret) return cmd_retrieve(session, parse_split(split), flags.eism_only);
    if (*ans) return cmd_answer(session, parse_split(split), flags.eism_only);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorpusError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelFileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << "error: no command given\n";
  return kExitUsage;
}

}  // namespace evchain
