#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brminer/extract.hpp"

namespace brminer {

/// The seven input-provenance scenarios a pool can be built for.
enum class PoolScenario {
  NoLit,
  ProjLit,
  AllLit,
  ProjLitLLM,
  AllLitLLM,
  ProjLitLLMOnly,
  AllLitLLMOnly,
};

const char* to_string(PoolScenario scenario);
PoolScenario pool_scenario_from_string(const std::string& text);
bool scenario_is_project_scoped(PoolScenario scenario);

struct SeedEntry {
  ValueKind kind = ValueKind::String;
  std::string value;

  bool operator==(const SeedEntry&) const = default;
};

/// Deduplicated seed inputs for one scenario. Entries are sorted by
/// (kind, value), kinds ordered Float < Integer < String, so exports
/// are byte-stable.
struct SeedPool {
  PoolScenario scenario = PoolScenario::NoLit;
  std::optional<std::string> project;  // set for Proj* scenarios
  std::vector<SeedEntry> entries;

  bool operator==(const SeedPool&) const = default;
};

using ValueList = std::vector<std::pair<std::string, ValueKind>>;

/// `extracted` holds the Regex+Javalang unique values per project,
/// `brminer_refined` the LLM-filtered sets, `llm_alone` the LLM-only
/// sets. Proj* scenarios require `project` and throw
/// Error(MissingProject) otherwise.
SeedPool build_pool(const std::map<std::string, ValueList>& extracted,
                    const std::map<std::string, ValueList>& brminer_refined,
                    const std::map<std::string, ValueList>& llm_alone,
                    PoolScenario scenario,
                    const std::optional<std::string>& project = std::nullopt);

std::string canonical_pool_text(const SeedPool& pool);
void export_canonical(const SeedPool& pool, const std::filesystem::path& path);
SeedPool parse_canonical_pool(const std::string& text);
SeedPool load_canonical(const std::filesystem::path& path);

/// Line format consumed by the companion test-generator patch:
///   S:<escaped string> | I:<integer> | F:<decimal>
/// with \n, \t, \\ and \: escaped and LF line endings. Strings longer
/// than 4096 bytes are dropped (with a log event), not truncated.
std::string evosuite_pool_text(const SeedPool& pool);
void export_evosuite(const SeedPool& pool, const std::filesystem::path& path);

/// Randoop-style class-literals block:
///   START CLASSLITERALS / CLASSNAME / <class> / LITERALS /
///   String:"..." | int:n | double:d ... / END CLASSLITERALS
std::string randoop_pool_text(const SeedPool& pool, const std::string& class_name);
void export_randoop(const SeedPool& pool, const std::string& class_name,
                    const std::filesystem::path& path);

struct ExperimentRow {
  std::string project;
  PoolScenario scenario = PoolScenario::NoLit;
  std::string tool;  // "evosuite" or "randoop"
  std::string pool_path;
  int time_budget_s = 180;
  int iterations = 5;
};

/// Cross product of projects x scenarios x {evosuite, randoop}; the plan
/// only names the runs, it does not execute them.
nlohmann::json experiment_manifest(const std::vector<std::string>& projects,
                                   const std::vector<PoolScenario>& scenarios,
                                   const std::string& corpus_ref,
                                   const std::filesystem::path& pools_dir);
void emit_experiment_manifest(const std::vector<std::string>& projects,
                              const std::vector<PoolScenario>& scenarios,
                              const std::string& corpus_ref,
                              const std::filesystem::path& pools_dir,
                              const std::filesystem::path& out_path);

}  // namespace brminer
