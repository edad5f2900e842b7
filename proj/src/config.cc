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

#include "evchain/config.h"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace evchain {

using nlohmann::json;
using nlohmann::ordered_json;

RunConfig full_defaults() {
  RunConfig cfg;
  cfg.screener_train = TrainConfig{.batch_size = 256,
                                   .learning_rate = 2e-4,
                                   .epochs = 5,
                                   .temperature = 1.0,
                                   .weight_decay = 0.01,
                                   .seed = cfg.seed};
  cfg.refiner_train = TrainConfig{.batch_size = 8,
                                  .learning_rate = 2e-5,
                                  .epochs = 5,
                                  .temperature = 1.0,
                                  .weight_decay = 0.01,
                                  .seed = cfg.seed + 1};
  return cfg;
}

namespace {

// Single-core settings. Temperature 0.05 sharpens the otherwise very flat
// softmax over raw cosines.
const char* const kDeskOverrides = R"({
  "screener_train": {"batch_size": 64, "learning_rate": 5e-3, "temperature": 0.05},
  "refiner_train": {"batch_size": 8, "learning_rate": 1e-3}
})";

template <typename T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

void apply_train(const json& j, TrainConfig& t) {
  if (!j.is_object()) throw ConfigError("training block must be an object");
  read(j, "batch_size", t.batch_size);
  read(j, "learning_rate", t.learning_rate);
  read(j, "epochs", t.epochs);
  read(j, "temperature", t.temperature);
  read(j, "weight_decay", t.weight_decay);
  read(j, "seed", t.seed);
  if (j.contains("schedule") && j["schedule"] != "linear")
    throw ConfigError("only the \"linear\" schedule is supported");
}

void apply_keys(const json& j, RunConfig& cfg) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  read(j, "corpus_path", cfg.corpus_path);
  read(j, "model_dir", cfg.model_dir);
  read(j, "out_dir", cfg.out_dir);
  if (j.contains("seed")) {
    read(j, "seed", cfg.seed);
    cfg.screener_train.seed = cfg.seed;
    cfg.refiner_train.seed = cfg.seed + 1;
  }
  if (j.contains("train_instances") && !j["train_instances"].is_null()) {
    int n = 0;
    read(j, "train_instances", n);
    cfg.train_instances = n;
  }
  read(j, "top_k", cfg.top_k);
  read(j, "eism_gap", cfg.eism_gap);
  read(j, "jobs", cfg.jobs);
  if (auto it = j.find("refine"); it != j.end()) {
    read(*it, "m_max", cfg.refine.m_max);
    if (it->contains("score_floor")) {
      if ((*it)["score_floor"].is_null()) {
        cfg.refine.score_floor.reset();
      } else {
        double floor = 0.0;
        read(*it, "score_floor", floor);
        cfg.refine.score_floor = floor;
      }
    }
  }
  if (auto it = j.find("surface"); it != j.end())
    read(*it, "image_object_tags", cfg.surface.image_object_tags);
  if (auto it = j.find("embedder"); it != j.end()) {
    read(*it, "dim", cfg.embedder.dim);
    read(*it, "ngram_orders", cfg.embedder.ngram_orders);
    read(*it, "dim_out", cfg.embedder.dim_out);
    read(*it, "hash_seed", cfg.embedder.hash_seed);
    read(*it, "init_seed", cfg.embedder.init_seed);
  }
  if (auto it = j.find("scorer"); it != j.end()) {
    read(*it, "hidden", cfg.scorer.hidden);
    read(*it, "hash_seed", cfg.scorer.hash_seed);
    read(*it, "init_seed", cfg.scorer.init_seed);
  }
  if (auto it = j.find("screener_train"); it != j.end()) apply_train(*it, cfg.screener_train);
  if (auto it = j.find("refiner_train"); it != j.end()) {
    apply_train(*it, cfg.refiner_train);
    std::string loss;
    read(*it, "loss", loss);
    if (loss == "literal") {
      cfg.refiner_options.loss = IerLossKind::kLiteral;
    } else if (loss == "bce") {
      cfg.refiner_options.loss = IerLossKind::kBinaryCrossEntropy;
    } else if (!loss.empty()) {
      throw ConfigError("refiner_train.loss must be \"bce\" or \"literal\"");
    }
    read(*it, "permute_gold", cfg.refiner_options.permute_gold);
  }
  if (auto it = j.find("answer"); it != j.end()) {
    std::string provider;
    read(*it, "provider", provider);
    if (provider == "external") {
      cfg.answer.provider = AnswerProvider::kExternal;
    } else if (provider == "extractive") {
      cfg.answer.provider = AnswerProvider::kExtractive;
    } else if (!provider.empty()) {
      throw ConfigError("answer.provider must be \"extractive\" or \"external\"");
    }
    if (it->contains("endpoint")) {
      if ((*it)["endpoint"].is_null()) {
        cfg.answer.endpoint.reset();
      } else {
        std::string ep;
        read(*it, "endpoint", ep);
        cfg.answer.endpoint = ep;
      }
    }
    read(*it, "timeout_s", cfg.answer.timeout_s);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (train_instances && *train_instances < 0)
    throw ConfigError("train_instances must be non-negative");
  if (!(eism_gap > 0.0)) throw ConfigError("eism_gap must be positive");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (answer.provider == AnswerProvider::kExternal && !answer.endpoint)
    throw ConfigError("answer.provider \"external\" needs answer.endpoint");
  if (!(answer.timeout_s > 0.0)) throw ConfigError("answer.timeout_s must be positive");
  if (embedder.dim < 2) throw ConfigError("embedder.dim must be at least 2");
  if (embedder.dim_out < 1) throw ConfigError("embedder.dim_out must be positive");
  if (scorer.hidden < 1) throw ConfigError("scorer.hidden must be positive");
  try {
    refine.validate();
    screener_train.validate();
    refiner_train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

ordered_json train_json(const TrainConfig& t) {
  ordered_json j;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["epochs"] = t.epochs;
  j["temperature"] = t.temperature;
  j["weight_decay"] = t.weight_decay;
  j["seed"] = t.seed;
  j["schedule"] = "linear";
  return j;
}

}  // namespace

std::string RunConfig::to_json() const {
  ordered_json j;
  j["profile"] = profile;
  j["corpus_path"] = corpus_path;
  j["model_dir"] = model_dir;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["train_instances"] = train_instances ? ordered_json(*train_instances) : ordered_json();
  j["top_k"] = top_k;
  j["eism_gap"] = eism_gap;
  j["jobs"] = jobs;
  j["refine"] = {{"m_max", refine.m_max},
                 {"score_floor",
                  refine.score_floor ? ordered_json(*refine.score_floor) : ordered_json()}};
  j["surface"] = {{"image_object_tags", surface.image_object_tags}};
  j["embedder"] = {{"dim", embedder.dim},
                   {"ngram_orders", embedder.ngram_orders},
                   {"dim_out", embedder.dim_out},
                   {"hash_seed", embedder.hash_seed},
                   {"init_seed", embedder.init_seed}};
  j["scorer"] = {{"hidden", scorer.hidden},
                 {"hash_seed", scorer.hash_seed},
                 {"init_seed", scorer.init_seed}};
  j["screener_train"] = train_json(screener_train);
  auto rt = train_json(refiner_train);
  rt["loss"] = refiner_options.loss == IerLossKind::kLiteral ? "literal" : "bce";
  rt["permute_gold"] = refiner_options.permute_gold;
  j["refiner_train"] = rt;
  j["answer"] = {
      {"provider", answer.provider == AnswerProvider::kExternal ? "external" : "extractive"},
      {"endpoint", answer.endpoint ? ordered_json(*answer.endpoint) : ordered_json()},
      {"timeout_s", answer.timeout_s}};
  return j.dump(2);
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg = full_defaults();
  read(j, "profile", cfg.profile);
  if (cfg.profile == "desk") {
    apply_keys(json::parse(kDeskOverrides), cfg);
  } else if (cfg.profile != "full") {
    throw ConfigError("profile must be \"full\" or \"desk\"");
  }
  apply_keys(j, cfg);
  if (cfg.profile == "desk") {
    if (auto it = j.find("desk"); it != j.end()) apply_keys(*it, cfg);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "eval") return Split::kEval;
  if (name == "all") return Split::kAll;
  throw ConfigError("split must be train, eval or all");
}

std::string split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kEval:
      return "eval";
    case Split::kAll:
      return "all";
  }
  return "all";
}

std::span<const QAInstance> split_instances(const Corpus& corpus, const RunConfig& cfg,
                                            Split split) {
  std::span<const QAInstance> all(corpus.instances());
  const std::size_t n_train =
      cfg.train_instances
          ? std::min(all.size(), static_cast<std::size_t>(*cfg.train_instances))
          : all.size() * 4 / 5;
  switch (split) {
    case Split::kTrain:
      return all.subspan(0, n_train);
    case Split::kEval:
      return all.subspan(n_train);
    case Split::kAll:
      return all;
  }
  return all;
}

}  // namespace evchain
