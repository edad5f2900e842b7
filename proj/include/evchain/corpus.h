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

#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evchain {

/// Reserved id of the termination pseudo-source.
inline constexpr std::string_view kStopId = "[STOP]";

enum class Modality { kText, kImage, kTable, kSentinel };

std::string_view modality_name(Modality m);
/// Parses "text" / "image" / "table". The sentinel is not a valid input modality.
std::optional<Modality> parse_modality(std::string_view name);

struct Source {
  std::string id;
  Modality modality = Modality::kText;
  std::optional<std::string> title;
  std::string body;
  std::optional<std::string> caption;
  std::optional<std::vector<std::string>> object_tags;

  bool operator==(const Source&) const = default;
};

struct QAInstance {
  std::string qid;
  std::string question;
  std::vector<std::string> gold_ids;
  std::vector<std::string> distractor_ids;
  std::string answer;

  bool operator==(const QAInstance&) const = default;
};

/// Raised for any malformed or inconsistent corpus input. `line()` is the
/// 1-based line of the offending record, or 0 when the error is not tied to
/// one line (e.g. a dangling reference detected after the whole file is read).
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Immutable after construction. Lookups by id are total over every id
/// referenced by an instance, and the sentinel is always present.
class Corpus {
 public:
  /// Validates every invariant; throws CorpusError on violation.
  Corpus(std::vector<Source> sources, std::vector<QAInstance> instances);

  const Source& source(std::string_view id) const;
  const Source* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  /// Sources in ingestion order (sentinel excluded).
  const std::vector<Source>& sources() const { return sources_; }
  const std::vector<QAInstance>& instances() const { return instances_; }
  const Source& stop_source() const { return stop_; }

  /// gold_ids followed by distractor_ids of one instance.
  std::vector<const Source*> pool_of(const QAInstance& inst) const;

  bool operator==(const Corpus& o) const {
    return sources_ == o.sources_ && instances_ == o.instances_;
  }

 private:
  std::vector<Source> sources_;
  std::vector<QAInstance> instances_;
  std::map<std::string, std::size_t, std::less<>> index_;
  Source stop_;
};

/// Reads the JSONL corpus format. Unknown fields are ignored.
Corpus ingest(std::istream& in);
Corpus ingest_file(const std::string& path);

/// Writes the canonical JSONL form: sources first, then instances, each in
/// corpus order. ingest(export) reproduces the corpus and re-export is
/// byte-identical.
void export_jsonl(const Corpus& corpus, std::ostream& out);
void export_jsonl_file(const Corpus& corpus, const std::string& path);

struct SurfaceOptions {
  bool image_object_tags = true;
};

/// Canonical text rendering used at retrieval time. The sentinel renders as
/// the empty string.
std::string text_surface(const Source& s, const SurfaceOptions& opts = {});

}  // namespace evchain
