#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/report.hpp"
#include "brminer/util.hpp"
#include "support.hpp"

using namespace brminer;

namespace {

BugReport make_report(const std::string& project, const std::string& id,
                      const std::string& title) {
  BugReport report;
  report.id = id;
  report.project = project;
  report.source = Source::Local;
  report.title = title;
  return report;
}

Corpus random_corpus(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Corpus corpus;
  const std::vector<std::string> projects = {"p-one", "p-two", "p-three"};
  std::size_t count = 1 + rng() % 12;
  for (std::size_t i = 0; i < count; ++i) {
    BugReport report;
    report.project = projects[rng() % projects.size()];
    report.id = "r" + std::to_string(i);
    report.source = static_cast<Source>(rng() % 3);
    report.title = "title " + std::to_string(rng() % 1000);
    report.description = "line one\nline two \"quoted\" — ünïcode";
    std::size_t comments = rng() % 4;
    for (std::size_t c = 0; c < comments; ++c)
      report.comments.push_back("comment " + std::to_string(c) + "\twith tab");
    if (rng() % 2) report.linked_bug_id = static_cast<long>(rng() % 500);
    corpus.insert(std::move(report));
  }
  return corpus;
}

}  // namespace

TEST_CASE("two lines of one project load into a single group") {
  std::string jsonl =
      R"({"comments":[],"description":"d1","id":"1","project":"p","source":"Local","title":"t1"})"
      "\n"
      R"({"comments":["c"],"description":"d2","id":"2","project":"p","source":"Local","title":"t2"})"
      "\n";
  Corpus corpus = parse_corpus(jsonl);
  REQUIRE(corpus.projects.size() == 1);
  CHECK(corpus.projects.at("p").size() == 2);
  CHECK(corpus.report_count() == 2);
}

TEST_CASE("empty file loads as an empty corpus") {
  Corpus corpus = parse_corpus("");
  CHECK(corpus.projects.empty());
  CHECK(corpus.report_count() == 0);
}

TEST_CASE("missing title is a parse error carrying the line number") {
  std::string jsonl =
      R"({"comments":[],"description":"d","id":"1","project":"p","source":"Local","title":"t"})"
      "\n"
      R"({"comments":[],"description":"d","id":"2","project":"p","source":"Local"})"
      "\n";
  try {
    parse_corpus(jsonl);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("invalid JSON reports its line number") {
  try {
    parse_corpus("{\"id\": \"1\"\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(e.line() == 1);
  }
}

TEST_CASE("duplicate (project, source, id) is rejected") {
  Corpus corpus;
  corpus.insert(make_report("p", "1", "a"));
  CHECK_THROWS_AS(corpus.insert(make_report("p", "1", "b")), Error);
  // Same id under a different source is a distinct report.
  BugReport other = make_report("p", "1", "c");
  other.source = Source::GitHub;
  CHECK_NOTHROW(corpus.insert(std::move(other)));
}

TEST_CASE("every report lands under exactly one project key") {
  Corpus corpus = random_corpus(11);
  std::size_t total = 0;
  for (const auto& [project, reports] : corpus.projects) {
    for (const auto& report : reports) CHECK(report.project == project);
    total += reports.size();
  }
  CHECK(total == corpus.report_count());
}

TEST_CASE("round trip: load(save(c)) equals c field-for-field") {
  auto dir = testsupport::temp_dir("corpus-roundtrip");
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Corpus corpus = random_corpus(seed);
    auto path = dir / ("corpus-" + std::to_string(seed) + ".jsonl");
    save_corpus(corpus, path);
    Corpus loaded = load_corpus(path);
    CHECK(loaded == corpus);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("saving is canonical: a second save is byte-identical") {
  auto dir = testsupport::temp_dir("corpus-canonical");
  Corpus corpus = random_corpus(7);
  auto first = dir / "one.jsonl";
  auto second = dir / "two.jsonl";
  save_corpus(corpus, first);
  save_corpus(load_corpus(first), second);
  CHECK(read_file(first) == read_file(second));
  // Keys are sorted and lines end in LF.
  std::string text = read_file(first);
  CHECK(text.find("\r") == std::string::npos);
  CHECK(text.back() == '\n');
  std::filesystem::remove_all(dir);
}

TEST_CASE("save writes a manifest sidecar whose counts match") {
  auto dir = testsupport::temp_dir("corpus-manifest");
  Corpus corpus = random_corpus(3);
  auto path = dir / "corpus.jsonl";
  save_corpus(corpus, path);
  auto sidecar = manifest_path_for(path);
  REQUIRE(std::filesystem::exists(sidecar));
  nlohmann::json manifest = nlohmann::json::parse(read_file(sidecar));
  CHECK(manifest.at("reports").get<std::size_t>() == corpus.report_count());
  for (const auto& [project, count] : corpus.manifest())
    CHECK(manifest.at("projects").at(project).get<std::size_t>() == count);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a manifest that disagrees with the data fails the load") {
  auto dir = testsupport::temp_dir("corpus-manifest-bad");
  Corpus corpus = random_corpus(5);
  auto path = dir / "corpus.jsonl";
  save_corpus(corpus, path);
  nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path_for(path)));
  auto first = manifest["projects"].begin();
  *first = first->get<long>() + 1;
  write_file_atomic(manifest_path_for(path), manifest.dump(2) + "\n");
  CHECK_THROWS_AS(load_corpus(path), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("saving an empty corpus still writes the manifest") {
  auto dir = testsupport::temp_dir("corpus-empty");
  auto path = dir / "corpus.jsonl";
  save_corpus(Corpus{}, path);
  CHECK(read_file(path).empty());
  CHECK(std::filesystem::exists(manifest_path_for(path)));
  CHECK(load_corpus(path) == Corpus{});
  std::filesystem::remove_all(dir);
}

TEST_CASE("save into an unwritable directory raises an io error") {
  CHECK_THROWS_AS(save_corpus(Corpus{}, "/proc/brminer-denied/corpus.jsonl"), Error);
}

TEST_CASE("the checked-in fixture corpus is already canonical") {
  auto fixture = testsupport::fixtures_dir() / "corpus" / "corpus.jsonl";
  Corpus corpus = load_corpus(fixture);
  CHECK(corpus.report_count() == 7);
  CHECK(corpus.projects.size() == 3);
  CHECK(serialize_corpus(corpus) == read_file(fixture));
}
