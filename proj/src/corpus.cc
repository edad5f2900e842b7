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

#include "evchain/corpus.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace evchain {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kText:
      return "text";
    case Modality::kImage:
      return "image";
    case Modality::kTable:
      return "table";
    case Modality::kSentinel:
      return "sentinel";
  }
  return "text";
}

std::optional<Modality> parse_modality(std::string_view name) {
  if (name == "text") return Modality::kText;
  if (name == "image") return Modality::kImage;
  if (name == "table") return Modality::kTable;
  return std::nullopt;
}

namespace {

std::string with_line(const std::string& what, std::size_t line) {
  if (line == 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

CorpusError::CorpusError(const std::string& what, std::size_t line)
    : std::runtime_error(with_line(what, line)), line_(line) {}

Corpus::Corpus(std::vector<Source> sources, std::vector<QAInstance> instances)
    : sources_(std::move(sources)), instances_(std::move(instances)) {
  stop_.id = std::string(kStopId);
  stop_.modality = Modality::kSentinel;

  for (std::size_t i = 0; i < sources_.size(); ++i) {
    const Source& s = sources_[i];
    if (s.id.empty()) throw CorpusError("source with empty id");
    if (s.id == kStopId) throw CorpusError("source id \"[STOP]\" is reserved");
    if (s.modality == Modality::kSentinel)
      throw CorpusError("source \"" + s.id + "\" uses the reserved sentinel modality");
    if (s.modality == Modality::kImage && !s.caption)
      throw CorpusError("image without caption: \"" + s.id + "\"");
    if (!index_.emplace(s.id, i).second)
      throw CorpusError("duplicate id \"" + s.id + "\"");
  }

  std::set<std::string, std::less<>> qids;
  for (const QAInstance& inst : instances_) {
    if (inst.qid.empty()) throw CorpusError("instance with empty qid");
    if (!qids.insert(inst.qid).second)
      throw CorpusError("duplicate qid \"" + inst.qid + "\"");
    if (inst.gold_ids.empty())
      throw CorpusError("instance \"" + inst.qid + "\" has no gold ids");
    std::set<std::string_view> gold(inst.gold_ids.begin(), inst.gold_ids.end());
    if (gold.size() != inst.gold_ids.size())
      throw CorpusError("instance \"" + inst.qid + "\" repeats a gold id");
    for (const auto& id : inst.distractor_ids) {
      if (gold.count(id))
        throw CorpusError("instance \"" + inst.qid + "\" lists \"" + id +
                          "\" as both gold and distractor");
    }
    for (const auto* ids : {&inst.gold_ids, &inst.distractor_ids}) {
      for (const auto& id : *ids) {
        if (!contains(id))
          throw CorpusError("instance \"" + inst.qid + "\" references unknown id \"" +
                            id + "\"");
      }
    }
  }
}

const Source* Corpus::find(std::string_view id) const {
  if (id == kStopId) return &stop_;
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &sources_[it->second];
}

const Source& Corpus::source(std::string_view id) const {
  const Source* s = find(id);
  if (s == nullptr) throw CorpusError("unknown source id \"" + std::string(id) + "\"");
  return *s;
}

std::vector<const Source*> Corpus::pool_of(const QAInstance& inst) const {
  std::vector<const Source*> pool;
  pool.reserve(inst.gold_ids.size() + inst.distractor_ids.size());
  for (const auto& id : inst.gold_ids) pool.push_back(&source(id));
  for (const auto& id : inst.distractor_ids) pool.push_back(&source(id));
  return pool;
}

namespace {

std::string require_string(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw CorpusError(std::string("missing field \"") + key + "\"", line);
  if (!it->is_string())
    throw CorpusError(std::string("field \"") + key + "\" must be a string", line);
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& rec, const char* key,
                                           std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw CorpusError(std::string("field \"") + key + "\" must be a string", line);
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& rec, const char* key, std::size_t line,
                                     bool required) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    if (required) throw CorpusError(std::string("missing field \"") + key + "\"", line);
    return {};
  }
  if (!it->is_array())
    throw CorpusError(std::string("field \"") + key + "\" must be an array", line);
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string())
      throw CorpusError(std::string("field \"") + key + "\" must hold strings", line);
    out.push_back(v.get<std::string>());
  }
  return out;
}

Source parse_source(const json& rec, std::size_t line) {
  Source s;
  s.id = require_string(rec, "id", line);
  if (s.id.empty()) throw CorpusError("source with empty id", line);
  const std::string modality = require_string(rec, "modality", line);
  auto m = parse_modality(modality);
  if (!m) throw CorpusError("unknown modality \"" + modality + "\"", line);
  s.modality = *m;
  s.title = optional_string(rec, "title", line);
  s.body = optional_string(rec, "body", line).value_or("");
  s.caption = optional_string(rec, "caption", line);
  if (rec.contains("object_tags") && !rec["object_tags"].is_null())
    s.object_tags = string_list(rec, "object_tags", line, true);
  if (s.modality == Modality::kImage && !s.caption)
    throw CorpusError("image without caption: \"" + s.id + "\"", line);
  return s;
}

QAInstance parse_instance(const json& rec, std::size_t line) {
  QAInstance inst;
  inst.qid = require_string(rec, "qid", line);
  inst.question = require_string(rec, "question", line);
  inst.gold_ids = string_list(rec, "gold_ids", line, true);
  inst.distractor_ids = string_list(rec, "distractor_ids", line, false);
  inst.answer = optional_string(rec, "answer", line).value_or("");
  if (inst.gold_ids.empty())
    throw CorpusError("instance \"" + inst.qid + "\" has no gold ids", line);
  return inst;
}

}  // namespace

Corpus ingest(std::istream& in) {
  std::vector<Source> sources;
  std::vector<QAInstance> instances;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw CorpusError(std::string("parse error: ") + e.what(), line);
    }
    if (!rec.is_object()) throw CorpusError("parse error: record is not an object", line);
    const std::string kind = require_string(rec, "kind", line);
    if (kind == "source") {
      Source s = parse_source(rec, line);
      if (s.id == kStopId) throw CorpusError("source id \"[STOP]\" is reserved", line);
      if (!seen.emplace(s.id, line).second)
        throw CorpusError("duplicate id \"" + s.id + "\"", line);
      sources.push_back(std::move(s));
    } else if (kind == "instance") {
      instances.push_back(parse_instance(rec, line));
    } else {
      throw CorpusError("unknown record kind \"" + kind + "\"", line);
    }
  }
  return Corpus(std::move(sources), std::move(instances));
}

Corpus ingest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file \"" + path + "\"");
  return ingest(in);
}

void export_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const Source& s : corpus.sources()) {
    ordered_json rec;
    rec["kind"] = "source";
    rec["id"] = s.id;
    rec["modality"] = modality_name(s.modality);
    if (s.title) rec["title"] = *s.title;
    if (!s.body.empty()) rec["body"] = s.body;
    if (s.caption) rec["caption"] = *s.caption;
    if (s.object_tags) rec["object_tags"] = *s.object_tags;
    out << rec.dump() << '\n';
  }
  for (const QAInstance& inst : corpus.instances()) {
    ordered_json rec;
    rec["kind"] = "instance";
    rec["qid"] = inst.qid;
    rec["question"] = inst.question;
    rec["gold_ids"] = inst.gold_ids;
    rec["distractor_ids"] = inst.distractor_ids;
    rec["answer"] = inst.answer;
    out << rec.dump() << '\n';
  }
}

void export_jsonl_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus file \"" + path + "\"");
  export_jsonl(corpus, out);
}

std::string text_surface(const Source& s, const SurfaceOptions& opts) {
  std::string out;
  auto append = [&out](std::string_view piece) {
    if (piece.empty()) return;
    if (!out.empty()) out += ' ';
    out += piece;
  };
  switch (s.modality) {
    case Modality::kSentinel:
      return {};
    case Modality::kText:
    case Modality::kTable:
      if (s.title) append(*s.title);
      append(s.body);
      break;
    case Modality::kImage:
      if (s.caption) append(*s.caption);
      if (opts.image_object_tags && s.object_tags) {
        for (const auto& tag : *s.object_tags) append(tag);
      }
      break;
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == '\t' || out.back() == '\n'))
    out.pop_back();
  return out;
}

}  // namespace evchain
