#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/extract.hpp"
#include "brminer/report.hpp"
#include "brminer/segment.hpp"
#include "brminer/seedpool.hpp"
#include "brminer/util.hpp"
#include "support.hpp"

using namespace brminer;

namespace {

struct Quiet {
  Quiet() { set_log_sink([](const std::string&) {}); }
  ~Quiet() { set_log_sink(nullptr); }
};

std::map<std::string, ValueList> two_projects() {
  return {
      {"p1", {{"a", ValueKind::String}, {"7", ValueKind::Integer}}},
      {"p2", {{"b", ValueKind::String}, {"a", ValueKind::String}}},
  };
}

SeedPool fixed_pool() {
  SeedPool pool;
  pool.scenario = PoolScenario::ProjLit;
  pool.project = "acme-demo";
  ValueList values = {
      {"ab", ValueKind::String},        {"7", ValueKind::Integer},
      {"a\nb", ValueKind::String},      {"c:d", ValueKind::String},
      {"0.001", ValueKind::Float},      {"tab\there", ValueKind::String},
      {"-3", ValueKind::Integer},       {"back\\slash", ValueKind::String},
  };
  return build_pool({{"acme-demo", values}}, {}, {}, PoolScenario::ProjLit,
                    std::string("acme-demo"));
}

}  // namespace

TEST_CASE("NoLit pools are empty") {
  SeedPool pool = build_pool(two_projects(), {}, {}, PoolScenario::NoLit);
  CHECK(pool.entries.empty());
  CHECK(!pool.project.has_value());
}

TEST_CASE("AllLit is the deduplicated union over projects") {
  SeedPool pool = build_pool(two_projects(), {}, {}, PoolScenario::AllLit);
  CHECK(pool.entries == std::vector<SeedEntry>{{ValueKind::Integer, "7"},
                                               {ValueKind::String, "a"},
                                               {ValueKind::String, "b"}});
}

TEST_CASE("Proj* scenarios demand a project key") {
  CHECK_THROWS_AS(build_pool(two_projects(), {}, {}, PoolScenario::ProjLit), Error);
  try {
    build_pool(two_projects(), {}, {}, PoolScenario::ProjLit, std::string("nope"));
    FAIL("expected MissingProject");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingProject);
  }
}

TEST_CASE("LLM-filtered pools equal the refined sets exactly") {
  std::map<std::string, ValueList> refined = {
      {"p1", {{"only", ValueKind::String}, {"5", ValueKind::Integer}}}};
  SeedPool pool = build_pool(two_projects(), refined, {}, PoolScenario::ProjLitLLM,
                             std::string("p1"));
  CHECK(pool.entries == std::vector<SeedEntry>{{ValueKind::Integer, "5"},
                                               {ValueKind::String, "only"}});

  std::map<std::string, ValueList> llm_alone = {{"p1", {{"x", ValueKind::String}}}};
  SeedPool alone = build_pool(two_projects(), refined, llm_alone,
                              PoolScenario::ProjLitLLMOnly, std::string("p1"));
  CHECK(alone.entries == std::vector<SeedEntry>{{ValueKind::String, "x"}});
}

TEST_CASE("evosuite export sorts integers before strings and escapes") {
  SeedPool pool = build_pool(
      {{"p", {{"ab", ValueKind::String}, {"7", ValueKind::Integer}}}}, {}, {},
      PoolScenario::ProjLit, std::string("p"));
  CHECK(evosuite_pool_text(pool) == "I:7\nS:ab\n");

  SeedPool tricky = build_pool({{"p", {{"a\nb", ValueKind::String}}}}, {}, {},
                               PoolScenario::ProjLit, std::string("p"));
  CHECK(evosuite_pool_text(tricky) == "S:a\\nb\n");
}

TEST_CASE("randoop export emits the block grammar") {
  SeedPool pool = build_pool({{"p", {{"5", ValueKind::Integer}}}}, {}, {},
                             PoolScenario::ProjLit, std::string("p"));
  CHECK(randoop_pool_text(pool, "a.B") ==
        "START CLASSLITERALS\nCLASSNAME\na.B\nLITERALS\nint:5\nEND CLASSLITERALS\n");

  SeedPool empty = build_pool({{"p", {}}}, {}, {}, PoolScenario::ProjLit,
                              std::string("p"));
  CHECK(randoop_pool_text(empty, "a.B") ==
        "START CLASSLITERALS\nCLASSNAME\na.B\nLITERALS\nEND CLASSLITERALS\n");
  CHECK_THROWS_AS(randoop_pool_text(empty, ""), Error);
}

TEST_CASE("canonical export round-trips exactly") {
  auto dir = testsupport::temp_dir("seedpool");
  SeedPool pool = fixed_pool();
  auto path = dir / "pool.json";
  export_canonical(pool, path);
  CHECK(load_canonical(path) == pool);

  SeedPool empty = build_pool({}, {}, {}, PoolScenario::NoLit);
  auto empty_path = dir / "empty.json";
  export_canonical(empty, empty_path);
  CHECK(load_canonical(empty_path) == empty);
  CHECK(canonical_pool_text(empty).find("\"entries\": []") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exports are byte-deterministic") {
  SeedPool pool = fixed_pool();
  CHECK(canonical_pool_text(pool) == canonical_pool_text(pool));
  CHECK(evosuite_pool_text(pool) == evosuite_pool_text(pool));
  CHECK(randoop_pool_text(pool, "a.B") == randoop_pool_text(pool, "a.B"));
}

TEST_CASE("golden files pin all three export formats") {
  SeedPool pool = fixed_pool();
  auto golden_dir = testsupport::fixtures_dir() / "golden";
  struct Expect {
    const char* name;
    std::string text;
  } cases[] = {
      {"fixed-pool.canonical.json", canonical_pool_text(pool)},
      {"fixed-pool.evosuite.txt", evosuite_pool_text(pool)},
      {"fixed-pool.randoop.txt", randoop_pool_text(pool, "seeds.PoolLiterals")},
  };
  for (const auto& c : cases) {
    auto path = golden_dir / c.name;
    if (std::getenv("BRMINER_UPDATE_GOLDENS")) write_file_atomic(path, c.text);
    REQUIRE_MESSAGE(std::filesystem::exists(path), c.name);
    CHECK_MESSAGE(read_file(path) == c.text, c.name);
  }
}

TEST_CASE("strings over 4096 bytes are dropped from exports") {
  Quiet quiet;
  ValueList values = {{std::string(5000, 'x'), ValueKind::String},
                      {"keep", ValueKind::String}};
  SeedPool pool = build_pool({{"p", values}}, {}, {}, PoolScenario::ProjLit,
                             std::string("p"));
  CHECK(evosuite_pool_text(pool) == "S:keep\n");
  CHECK(randoop_pool_text(pool, "a.B").find("keep") != std::string::npos);
  CHECK(randoop_pool_text(pool, "a.B").find(std::string(100, 'x')) == std::string::npos);
}

TEST_CASE("experiment manifest is the projects x scenarios x tools product") {
  std::vector<PoolScenario> scenarios = {
      PoolScenario::NoLit,      PoolScenario::ProjLit,        PoolScenario::AllLit,
      PoolScenario::ProjLitLLM, PoolScenario::AllLitLLM,
      PoolScenario::ProjLitLLMOnly, PoolScenario::AllLitLLMOnly};
  nlohmann::json manifest =
      experiment_manifest({"p1", "p2"}, scenarios, "corpus.jsonl", "pools");
  CHECK(manifest.at("runs").size() == 2 * 7 * 2);
  for (const auto& row : manifest["runs"]) {
    CHECK(row.at("time_budget_s") == 180);
    CHECK(row.at("iterations") == 5);
    std::string tool = row.at("tool");
    CHECK((tool == "evosuite" || tool == "randoop"));
  }

  nlohmann::json empty = experiment_manifest({"p1"}, {}, "corpus.jsonl", "pools");
  CHECK(empty.at("runs").empty());

  auto golden = testsupport::fixtures_dir() / "golden" / "manifest.json";
  std::string text = manifest.dump(2) + "\n";
  if (std::getenv("BRMINER_UPDATE_GOLDENS")) write_file_atomic(golden, text);
  REQUIRE(std::filesystem::exists(golden));
  CHECK(read_file(golden) == text);
}

TEST_CASE("AllLit equals the union of ProjLit pools on the fixture corpus") {
  Corpus corpus = load_corpus(testsupport::fixtures_dir() / "corpus" / "corpus.jsonl");
  std::map<std::string, ValueList> extracted;
  std::map<std::string, std::set<std::pair<std::string, int>>> seen;
  for (const auto& [project, reports] : corpus.projects)
    for (const auto& report : reports) {
      InputSet set = extract(segment(report), ExtractMode::RegexPlusJavalang);
      for (const auto& [value, kind] : set.unique_values)
        if (seen[project].insert({value, static_cast<int>(kind)}).second)
          extracted[project].emplace_back(value, kind);
    }

  SeedPool all = build_pool(extracted, {}, {}, PoolScenario::AllLit);
  std::set<SeedEntry, decltype([](const SeedEntry& a, const SeedEntry& b) {
             return std::tie(a.kind, a.value) < std::tie(b.kind, b.value);
           })>
      union_of_proj;
  for (const auto& [project, values] : extracted) {
    SeedPool proj = build_pool(extracted, {}, {}, PoolScenario::ProjLit, project);
    for (const auto& entry : proj.entries) union_of_proj.insert(entry);
  }
  std::set<SeedEntry, decltype([](const SeedEntry& a, const SeedEntry& b) {
             return std::tie(a.kind, a.value) < std::tie(b.kind, b.value);
           })>
      all_set(all.entries.begin(), all.entries.end());
  CHECK(all_set.size() == union_of_proj.size());
  CHECK(std::equal(all_set.begin(), all_set.end(), union_of_proj.begin(),
                   [](const SeedEntry& a, const SeedEntry& b) {
                     return a.kind == b.kind && a.value == b.value;
                   }));
}
