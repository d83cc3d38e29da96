#include "brminer/seedpool.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/util.hpp"

namespace brminer {

namespace {

constexpr std::size_t kMaxExportBytes = 4096;  // generator command-line limits

int kind_rank(ValueKind kind) {
  switch (kind) {
    case ValueKind::Float: return 0;
    case ValueKind::Integer: return 1;
    case ValueKind::String: return 2;
  }
  return 3;
}

bool entry_less(const SeedEntry& a, const SeedEntry& b) {
  if (kind_rank(a.kind) != kind_rank(b.kind)) return kind_rank(a.kind) < kind_rank(b.kind);
  return a.value < b.value;
}

std::vector<SeedEntry> sorted_unique(const ValueList& values) {
  std::vector<SeedEntry> entries;
  entries.reserve(values.size());
  for (const auto& [value, kind] : values) entries.push_back({kind, value});
  std::sort(entries.begin(), entries.end(), entry_less);
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  return entries;
}

ValueList union_of(const std::map<std::string, ValueList>& by_project) {
  ValueList all;
  for (const auto& [project, values] : by_project)
    all.insert(all.end(), values.begin(), values.end());
  return all;
}

const ValueList& project_values(const std::map<std::string, ValueList>& by_project,
                                const std::string& project) {
  auto it = by_project.find(project);
  if (it == by_project.end())
    throw Error(ErrorKind::MissingProject, "no inputs recorded for project '" + project + "'");
  return it->second;
}

std::string escape_colon_format(const std::string& value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      case ':': out += "\\:"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string escape_java_string(const std::string& value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

bool droppable(const SeedEntry& entry) {
  return entry.kind == ValueKind::String && entry.value.size() > kMaxExportBytes;
}

}  // namespace

const char* to_string(PoolScenario scenario) {
  switch (scenario) {
    case PoolScenario::NoLit: return "NoLit";
    case PoolScenario::ProjLit: return "ProjLit";
    case PoolScenario::AllLit: return "AllLit";
    case PoolScenario::ProjLitLLM: return "ProjLitLLM";
    case PoolScenario::AllLitLLM: return "AllLitLLM";
    case PoolScenario::ProjLitLLMOnly: return "ProjLitLLMOnly";
    case PoolScenario::AllLitLLMOnly: return "AllLitLLMOnly";
  }
  return "?";
}

PoolScenario pool_scenario_from_string(const std::string& text) {
  for (PoolScenario s : {PoolScenario::NoLit, PoolScenario::ProjLit, PoolScenario::AllLit,
                         PoolScenario::ProjLitLLM, PoolScenario::AllLitLLM,
                         PoolScenario::ProjLitLLMOnly, PoolScenario::AllLitLLMOnly})
    if (text == to_string(s)) return s;
  throw Error(ErrorKind::Config, "unknown pool scenario '" + text + "'");
}

bool scenario_is_project_scoped(PoolScenario scenario) {
  return scenario == PoolScenario::ProjLit || scenario == PoolScenario::ProjLitLLM ||
         scenario == PoolScenario::ProjLitLLMOnly;
}

SeedPool build_pool(const std::map<std::string, ValueList>& extracted,
                    const std::map<std::string, ValueList>& brminer_refined,
                    const std::map<std::string, ValueList>& llm_alone,
                    PoolScenario scenario, const std::optional<std::string>& project) {
  if (scenario_is_project_scoped(scenario) && !project)
    throw Error(ErrorKind::MissingProject,
                std::string(to_string(scenario)) + " pools require a project key");

  SeedPool pool;
  pool.scenario = scenario;
  if (scenario_is_project_scoped(scenario)) pool.project = project;

  switch (scenario) {
    case PoolScenario::NoLit:
      break;
    case PoolScenario::ProjLit:
      pool.entries = sorted_unique(project_values(extracted, *project));
      break;
    case PoolScenario::AllLit:
      pool.entries = sorted_unique(union_of(extracted));
      break;
    case PoolScenario::ProjLitLLM:
      pool.entries = sorted_unique(project_values(brminer_refined, *project));
      break;
    case PoolScenario::AllLitLLM:
      pool.entries = sorted_unique(union_of(brminer_refined));
      break;
    case PoolScenario::ProjLitLLMOnly:
      pool.entries = sorted_unique(project_values(llm_alone, *project));
      break;
    case PoolScenario::AllLitLLMOnly:
      pool.entries = sorted_unique(union_of(llm_alone));
      break;
  }
  return pool;
}

std::string canonical_pool_text(const SeedPool& pool) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& entry : pool.entries)
    entries.push_back({{"kind", to_string(entry.kind)}, {"value", entry.value}});
  nlohmann::json doc{
      {"entries", entries},
      {"provenance", to_string(pool.scenario)},
      {"scope", pool.project ? nlohmann::json(*pool.project) : nlohmann::json("all-projects")},
  };
  return doc.dump(2) + "\n";
}

void export_canonical(const SeedPool& pool, const std::filesystem::path& path) {
  write_file_atomic(path, canonical_pool_text(pool));
}

SeedPool parse_canonical_pool(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::Parse, "pool file is not valid JSON");
  SeedPool pool;
  pool.scenario = pool_scenario_from_string(doc.at("provenance").get<std::string>());
  const auto scope = doc.at("scope").get<std::string>();
  if (scope != "all-projects") pool.project = scope;
  for (const auto& item : doc.at("entries"))
    pool.entries.push_back({value_kind_from_string(item.at("kind").get<std::string>()),
                            item.at("value").get<std::string>()});
  return pool;
}

SeedPool load_canonical(const std::filesystem::path& path) {
  return parse_canonical_pool(read_file(path));
}

std::string evosuite_pool_text(const SeedPool& pool) {
  std::string out;
  for (const auto& entry : pool.entries) {
    if (droppable(entry)) {
      log_event({{"event", "export_dropped_literal"},
                 {"reason", "string exceeds 4096 bytes"},
                 {"bytes", entry.value.size()}});
      continue;
    }
    switch (entry.kind) {
      case ValueKind::String: out += "S:" + escape_colon_format(entry.value); break;
      case ValueKind::Integer: out += "I:" + entry.value; break;
      case ValueKind::Float: out += "F:" + entry.value; break;
    }
    out += '\n';
  }
  return out;
}

void export_evosuite(const SeedPool& pool, const std::filesystem::path& path) {
  write_file_atomic(path, evosuite_pool_text(pool));
}

std::string randoop_pool_text(const SeedPool& pool, const std::string& class_name) {
  if (class_name.empty())
    throw Error(ErrorKind::Config, "randoop export needs a fully-qualified class name");
  std::string out = "START CLASSLITERALS\nCLASSNAME\n" + class_name + "\nLITERALS\n";
  for (const auto& entry : pool.entries) {
    if (droppable(entry)) {
      log_event({{"event", "export_dropped_literal"},
                 {"reason", "string exceeds 4096 bytes"},
                 {"bytes", entry.value.size()}});
      continue;
    }
    switch (entry.kind) {
      case ValueKind::String:
        out += "String:\"" + escape_java_string(entry.value) + "\"";
        break;
      case ValueKind::Integer: out += "int:" + entry.value; break;
      case ValueKind::Float: out += "double:" + entry.value; break;
    }
    out += '\n';
  }
  out += "END CLASSLITERALS\n";
  return out;
}

void export_randoop(const SeedPool& pool, const std::string& class_name,
                    const std::filesystem::path& path) {
  write_file_atomic(path, randoop_pool_text(pool, class_name));
}

nlohmann::json experiment_manifest(const std::vector<std::string>& projects,
                                   const std::vector<PoolScenario>& scenarios,
                                   const std::string& corpus_ref,
                                   const std::filesystem::path& pools_dir) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& project : projects) {
    for (PoolScenario scenario : scenarios) {
      std::string pool_name = scenario_is_project_scoped(scenario)
                                  ? std::string(to_string(scenario)) + "-" + project
                                  : std::string(to_string(scenario));
      std::string pool_path = (pools_dir / (pool_name + ".json")).generic_string();
      for (const char* tool : {"evosuite", "randoop"}) {
        rows.push_back({
            {"iterations", 5},
            {"pool", pool_path},
            {"project", project},
            {"scenario", to_string(scenario)},
            {"time_budget_s", 180},
            {"tool", tool},
        });
      }
    }
  }
  return nlohmann::json{{"corpus", corpus_ref}, {"runs", rows}};
}

void emit_experiment_manifest(const std::vector<std::string>& projects,
                              const std::vector<PoolScenario>& scenarios,
                              const std::string& corpus_ref,
                              const std::filesystem::path& pools_dir,
                              const std::filesystem::path& out_path) {
  write_file_atomic(out_path,
                    experiment_manifest(projects, scenarios, corpus_ref, pools_dir).dump(2) + "\n");
}

}  // namespace brminer
