#include "brminer/report.hpp"

#include <algorithm>
#include <tuple>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/util.hpp"

namespace brminer {

const char* to_string(Source source) {
  switch (source) {
    case Source::GitHub: return "GitHub";
    case Source::Jira: return "Jira";
    case Source::Local: return "Local";
  }
  return "Local";
}

Source source_from_string(const std::string& text) {
  if (text == "GitHub") return Source::GitHub;
  if (text == "Jira") return Source::Jira;
  if (text == "Local") return Source::Local;
  throw Error(ErrorKind::Parse, "unknown source '" + text + "'");
}

namespace {

auto canonical_key(const BugReport& r) {
  return std::make_tuple(std::string(to_string(r.source)), r.id);
}

}  // namespace

std::size_t Corpus::report_count() const {
  std::size_t n = 0;
  for (const auto& [key, reports] : projects) n += reports.size();
  return n;
}

std::map<std::string, std::size_t> Corpus::manifest() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& [key, reports] : projects) counts[key] = reports.size();
  return counts;
}

void Corpus::insert(BugReport report) {
  if (report.id.empty()) throw Error(ErrorKind::Parse, "report id must be non-empty");
  if (report.project.empty()) throw Error(ErrorKind::Parse, "report project must be non-empty");
  auto& reports = projects[report.project];
  auto pos = std::lower_bound(reports.begin(), reports.end(), report,
                              [](const BugReport& a, const BugReport& b) {
                                return canonical_key(a) < canonical_key(b);
                              });
  if (pos != reports.end() && canonical_key(*pos) == canonical_key(report))
    throw Error(ErrorKind::Parse, "duplicate report " + report.project + "/" + report.id);
  reports.insert(pos, std::move(report));
}

nlohmann::json report_to_json(const BugReport& report) {
  nlohmann::json j{
      {"comments", report.comments},
      {"description", report.description},
      {"id", report.id},
      {"project", report.project},
      {"source", to_string(report.source)},
      {"title", report.title},
  };
  if (report.linked_bug_id) j["linked_bug_id"] = *report.linked_bug_id;
  return j;
}

BugReport report_from_json(const nlohmann::json& value) {
  if (!value.is_object()) throw Error(ErrorKind::Parse, "report line is not a JSON object");
  for (const char* field : {"id", "project", "source", "title", "description", "comments"}) {
    if (!value.contains(field))
      throw Error(ErrorKind::Parse, std::string("missing field \"") + field + "\"");
  }
  BugReport report;
  report.id = value.at("id").get<std::string>();
  report.project = value.at("project").get<std::string>();
  report.source = source_from_string(value.at("source").get<std::string>());
  report.title = value.at("title").get<std::string>();
  report.description = value.at("description").get<std::string>();
  if (!value.at("comments").is_array())
    throw Error(ErrorKind::Parse, "\"comments\" must be an array of strings");
  for (const auto& comment : value.at("comments"))
    report.comments.push_back(comment.get<std::string>());
  if (value.contains("linked_bug_id") && !value.at("linked_bug_id").is_null())
    report.linked_bug_id = value.at("linked_bug_id").get<long>();
  return report;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& [key, reports] : corpus.projects)
    for (const auto& report : reports) {
      out += report_to_json(report).dump();
      out += '\n';
    }
  return out;
}

Corpus parse_corpus(const std::string& text) {
  Corpus corpus;
  for_each_line(text, [&](long line_number, std::string_view line) {
    if (line.empty()) return;
    nlohmann::json value = nlohmann::json::parse(line, nullptr, false);
    if (value.is_discarded())
      throw Error(ErrorKind::Parse, "invalid JSON", line_number);
    try {
      corpus.insert(report_from_json(value));
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, e.what(), line_number);
    }
  });
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus = parse_corpus(read_file(path));
  auto sidecar = manifest_path_for(path);
  if (std::filesystem::exists(sidecar)) {
    nlohmann::json manifest = nlohmann::json::parse(read_file(sidecar), nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("projects"))
      throw Error(ErrorKind::Parse, "malformed manifest " + sidecar.string());
    auto actual = corpus.manifest();
    for (const auto& [key, count] : manifest.at("projects").items()) {
      auto it = actual.find(key);
      if (it == actual.end() || it->second != count.get<std::size_t>())
        throw Error(ErrorKind::Parse,
                    "manifest count mismatch for project '" + key + "'");
    }
    if (manifest.at("projects").size() != actual.size())
      throw Error(ErrorKind::Parse, "manifest lists a different project set");
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
  nlohmann::json manifest{
      {"projects", corpus.manifest()},
      {"reports", corpus.report_count()},
  };
  write_file_atomic(manifest_path_for(path), manifest.dump(2) + "\n");
}

std::filesystem::path manifest_path_for(const std::filesystem::path& corpus_path) {
  std::filesystem::path sidecar = corpus_path;
  sidecar.replace_extension();
  sidecar += ".manifest.json";
  return sidecar;
}

}  // namespace brminer
