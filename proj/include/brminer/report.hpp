#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace brminer {

enum class Source { GitHub, Jira, Local };

const char* to_string(Source source);
Source source_from_string(const std::string& text);

/// One issue-tracker entry. `id` is unique within (project, source);
/// comments keep their submission order.
struct BugReport {
  std::string id;
  std::string project;
  Source source = Source::Local;
  std::string title;
  std::string description;
  std::vector<std::string> comments;
  std::optional<long> linked_bug_id;

  bool operator==(const BugReport&) const = default;
};

/// Reports grouped by project key. The per-project vectors are kept in
/// canonical order (source, then id) so that serialization is stable and
/// load(save(c)) == c holds field-for-field.
struct Corpus {
  std::map<std::string, std::vector<BugReport>> projects;

  std::size_t report_count() const;
  std::map<std::string, std::size_t> manifest() const;

  /// Inserts at the canonical position; rejects duplicate (project, source, id).
  void insert(BugReport report);

  bool operator==(const Corpus&) const = default;
};

nlohmann::json report_to_json(const BugReport& report);
BugReport report_from_json(const nlohmann::json& value);

/// JSONL, one report per line, keys sorted, UTF-8, LF endings.
std::string serialize_corpus(const Corpus& corpus);

/// Parses JSONL; throws Error(Parse) with the offending 1-based line number.
Corpus parse_corpus(const std::string& text);

Corpus load_corpus(const std::filesystem::path& path);

/// Atomic write of the JSONL plus a `<stem>.manifest.json` sidecar with
/// per-project counts.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

std::filesystem::path manifest_path_for(const std::filesystem::path& corpus_path);

}  // namespace brminer
