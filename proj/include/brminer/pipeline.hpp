#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "brminer/extract.hpp"
#include "brminer/llm.hpp"
#include "brminer/seedpool.hpp"

namespace brminer {

struct Config {
  std::filesystem::path corpus_path;
  std::filesystem::path out_dir = "out";
  std::vector<ExtractMode> modes = {ExtractMode::JavalangOnly,
                                    ExtractMode::RegexPlusJavalang};
  ProseHandling javalang_prose = ProseHandling::Scan;

  // LLM stage: an empty endpoint replays recorded responses from
  // fixtures_dir instead of calling out.
  std::string llm_endpoint;
  std::filesystem::path llm_fixtures_dir;
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  int max_total_tokens = 4096;
  int response_reserve = 512;
  int llm_parallelism = 2;
  int llm_requests_per_minute = 0;  // 0 = unthrottled
  ParseErrorPolicy on_parse_error = ParseErrorPolicy::Empty;

  std::vector<PoolScenario> scenarios;
  std::vector<std::string> export_formats = {"canonical", "evosuite", "randoop"};
  std::string randoop_class = "seeds.PoolLiterals";

  double sampling_rate = 0.10;
  std::uint64_t seed = 1;

  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> testcases_dir;

  bool allow_network = false;
};

struct ConfigValidation {
  std::optional<Config> config;  // set when diagnostics is empty
  std::vector<std::string> diagnostics;
};

/// Checks every invariant and reports all violations, not just the first.
ConfigValidation validate_config(const std::filesystem::path& path);
ConfigValidation validate_config_json(const nlohmann::json& doc,
                                      const std::filesystem::path& base_dir);

/// fetch -> segment -> extract -> filter/classify -> metrics -> export.
/// Stage outputs land in config.out_dir as JSONL plus a hashes.json of
/// sha256 digests; reruns over unchanged inputs produce identical hashes.
/// Returns 0 when every stage succeeded.
int run_pipeline(const Config& config);

// Individual stages, reusable by the CLI subcommands.
/// Completion concurrency: in-flight bound plus an optional global
/// requests/minute throttle shared by the workers.
struct LlmRunOptions {
  int parallelism = 2;
  int requests_per_minute = 0;
  CompleteOptions complete;
};

void stage_segment(const std::filesystem::path& corpus_path,
                   const std::filesystem::path& out_path);
void stage_extract(const std::filesystem::path& segments_path,
                   const std::filesystem::path& out_path, ExtractMode mode,
                   ProseHandling prose);
void stage_filter(const std::filesystem::path& corpus_path,
                  const std::filesystem::path& inputs_path,
                  const std::filesystem::path& out_path, Provenance provenance,
                  ChatClient& client, const PromptOptions& prompt_options,
                  ParseErrorPolicy on_parse_error, const LlmRunOptions& run = {});
void stage_classify(const std::filesystem::path& corpus_path,
                    const std::filesystem::path& out_path, ChatClient& client,
                    const PromptOptions& prompt_options, const LlmRunOptions& run = {});

std::vector<SegmentedReport> load_segments(const std::filesystem::path& path);
std::vector<InputSet> load_input_sets(const std::filesystem::path& path);
std::vector<RefinedInputSet> load_refined(const std::filesystem::path& path);
std::vector<ClassificationRecord> load_classifications(const std::filesystem::path& path);

}  // namespace brminer
