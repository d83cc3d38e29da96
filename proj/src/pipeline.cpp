#include "brminer/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/metrics.hpp"
#include "brminer/segment.hpp"
#include "brminer/util.hpp"

namespace brminer {

namespace {

template <typename T, typename FromJson>
std::vector<T> load_jsonl(const std::filesystem::path& path, FromJson from_json) {
  std::vector<T> out;
  const std::string text = read_file(path);
  for_each_line(text, [&](long line_number, std::string_view line) {
    if (line.empty()) return;
    nlohmann::json value = nlohmann::json::parse(line, nullptr, false);
    if (value.is_discarded())
      throw Error(ErrorKind::Parse, "invalid JSON in " + path.string(), line_number);
    out.push_back(from_json(value));
  });
  return out;
}

template <typename T, typename ToJson>
void save_jsonl(const std::filesystem::path& path, const std::vector<T>& items,
                ToJson to_json) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<BugReport> flatten(const Corpus& corpus) {
  std::vector<BugReport> reports;
  for (const auto& [project, list] : corpus.projects)
    reports.insert(reports.end(), list.begin(), list.end());
  return reports;
}

}  // namespace

std::vector<SegmentedReport> load_segments(const std::filesystem::path& path) {
  return load_jsonl<SegmentedReport>(path, segmented_from_json);
}

std::vector<InputSet> load_input_sets(const std::filesystem::path& path) {
  return load_jsonl<InputSet>(path, input_set_from_json);
}

std::vector<RefinedInputSet> load_refined(const std::filesystem::path& path) {
  return load_jsonl<RefinedInputSet>(path, refined_from_json);
}

std::vector<ClassificationRecord> load_classifications(const std::filesystem::path& path) {
  return load_jsonl<ClassificationRecord>(path, classification_from_json);
}

void stage_segment(const std::filesystem::path& corpus_path,
                   const std::filesystem::path& out_path) {
  Corpus corpus = load_corpus(corpus_path);
  std::vector<SegmentedReport> segmented;
  for (const auto& report : flatten(corpus)) segmented.push_back(segment(report));
  save_jsonl(out_path, segmented, segmented_to_json);
}

void stage_extract(const std::filesystem::path& segments_path,
                   const std::filesystem::path& out_path, ExtractMode mode,
                   ProseHandling prose) {
  std::vector<InputSet> sets;
  for (const auto& sr : load_segments(segments_path))
    sets.push_back(extract(sr, mode, prose));
  save_jsonl(out_path, sets, input_set_to_json);
}

void stage_filter(const std::filesystem::path& corpus_path,
                  const std::filesystem::path& inputs_path,
                  const std::filesystem::path& out_path, Provenance provenance,
                  ChatClient& client, const PromptOptions& prompt_options,
                  ParseErrorPolicy on_parse_error, const LlmRunOptions& run) {
  Corpus corpus = load_corpus(corpus_path);
  std::map<std::pair<std::string, std::string>, InputSet> inputs_by_report;
  if (provenance == Provenance::BRMiner)
    for (auto& set : load_input_sets(inputs_path))
      inputs_by_report[{set.project, set.report_id}] = std::move(set);

  const std::vector<BugReport> reports = flatten(corpus);
  std::vector<RefinedInputSet> refined(reports.size());
  RateLimiter limiter(run.requests_per_minute);
  parallel_for(reports.size(), run.parallelism, [&](std::size_t i) {
    const BugReport& report = reports[i];
    const InputSet* extracted = nullptr;
    if (provenance == Provenance::BRMiner) {
      auto it = inputs_by_report.find({report.project, report.id});
      if (it == inputs_by_report.end())
        throw Error(ErrorKind::Config,
                    "no extracted inputs for report " + report.project + "/" + report.id);
      extracted = &it->second;
    }
    limiter.acquire();
    refined[i] = refine(report, extracted, provenance, client, prompt_options,
                        run.complete, on_parse_error);
  });
  save_jsonl(out_path, refined, refined_to_json);
}

void stage_classify(const std::filesystem::path& corpus_path,
                    const std::filesystem::path& out_path, ChatClient& client,
                    const PromptOptions& prompt_options, const LlmRunOptions& run) {
  Corpus corpus = load_corpus(corpus_path);
  const std::vector<BugReport> reports = flatten(corpus);
  std::vector<ClassificationRecord> records(reports.size());
  RateLimiter limiter(run.requests_per_minute);
  parallel_for(reports.size(), run.parallelism, [&](std::size_t i) {
    limiter.acquire();
    records[i] = classify(reports[i], client, prompt_options, run.complete);
  });
  save_jsonl(out_path, records, classification_to_json);
}

namespace {

std::optional<ExtractMode> mode_from(const std::string& text) {
  try {
    return extract_mode_from_string(text);
  } catch (const Error&) {
    return std::nullopt;
  }
}

ConfigValidation invalid(std::vector<std::string> diagnostics) {
  ConfigValidation v;
  v.diagnostics = std::move(diagnostics);
  return v;
}

}  // namespace

ConfigValidation validate_config_json(const nlohmann::json& doc,
                                      const std::filesystem::path& base_dir) {
  std::vector<std::string> diagnostics;
  Config config;

  if (!doc.is_object()) return invalid({"config must be a JSON object"});

  auto resolve = [&](const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base_dir / p;
  };

  if (!doc.contains("corpus") || !doc["corpus"].is_string()) {
    diagnostics.push_back("\"corpus\" (path to the corpus JSONL) is required");
  } else {
    config.corpus_path = resolve(doc["corpus"].get<std::string>());
    if (!std::filesystem::exists(config.corpus_path))
      diagnostics.push_back("corpus path does not exist: " + config.corpus_path.string());
  }

  if (doc.contains("out_dir")) config.out_dir = resolve(doc["out_dir"].get<std::string>());

  if (doc.contains("extraction")) {
    const auto& extraction = doc["extraction"];
    if (extraction.contains("modes")) {
      config.modes.clear();
      for (const auto& m : extraction["modes"]) {
        auto mode = mode_from(m.get<std::string>());
        if (!mode)
          diagnostics.push_back("unknown extraction mode: " + m.get<std::string>());
        else
          config.modes.push_back(*mode);
      }
      if (config.modes.empty()) diagnostics.push_back("extraction.modes is empty");
    }
    if (extraction.contains("javalang_prose")) {
      const auto value = extraction["javalang_prose"].get<std::string>();
      if (value == "scan") config.javalang_prose = ProseHandling::Scan;
      else if (value == "skip") config.javalang_prose = ProseHandling::Skip;
      else diagnostics.push_back("extraction.javalang_prose must be scan or skip");
    }
  }

  if (doc.contains("llm")) {
    const auto& llm = doc["llm"];
    if (llm.contains("endpoint")) config.llm_endpoint = llm["endpoint"].get<std::string>();
    if (llm.contains("fixtures"))
      config.llm_fixtures_dir = resolve(llm["fixtures"].get<std::string>());
    if (llm.contains("model")) config.model = llm["model"].get<std::string>();
    if (llm.contains("temperature")) {
      config.temperature = llm["temperature"].get<double>();
      if (config.temperature < 0.0 || config.temperature > 2.0)
        diagnostics.push_back("llm.temperature must be within [0, 2]");
    }
    if (llm.contains("max_total_tokens"))
      config.max_total_tokens = llm["max_total_tokens"].get<int>();
    if (llm.contains("response_reserve"))
      config.response_reserve = llm["response_reserve"].get<int>();
    if (config.response_reserve >= config.max_total_tokens)
      diagnostics.push_back("llm.response_reserve must be below llm.max_total_tokens");
    if (llm.contains("parallelism")) {
      config.llm_parallelism = llm["parallelism"].get<int>();
      if (config.llm_parallelism < 1)
        diagnostics.push_back("llm.parallelism must be at least 1");
    }
    if (llm.contains("requests_per_minute")) {
      config.llm_requests_per_minute = llm["requests_per_minute"].get<int>();
      if (config.llm_requests_per_minute < 0)
        diagnostics.push_back("llm.requests_per_minute cannot be negative");
    }
    if (llm.contains("on_parse_error")) {
      const auto value = llm["on_parse_error"].get<std::string>();
      if (value == "empty") config.on_parse_error = ParseErrorPolicy::Empty;
      else if (value == "passthrough") config.on_parse_error = ParseErrorPolicy::Passthrough;
      else diagnostics.push_back("llm.on_parse_error must be empty or passthrough");
    }
    if (config.llm_endpoint.empty() && config.llm_fixtures_dir.empty())
      diagnostics.push_back("llm needs either an endpoint or a fixtures directory");
    if (!config.llm_fixtures_dir.empty() &&
        !std::filesystem::exists(config.llm_fixtures_dir))
      diagnostics.push_back("llm.fixtures path does not exist: " +
                            config.llm_fixtures_dir.string());
  } else {
    diagnostics.push_back("\"llm\" section is required");
  }

  if (doc.contains("scenarios")) {
    for (const auto& s : doc["scenarios"]) {
      try {
        config.scenarios.push_back(pool_scenario_from_string(s.get<std::string>()));
      } catch (const Error& e) {
        diagnostics.push_back(e.what());
      }
    }
  }

  if (doc.contains("export_formats"))
    config.export_formats = doc["export_formats"].get<std::vector<std::string>>();
  for (const auto& format : config.export_formats)
    if (format != "canonical" && format != "evosuite" && format != "randoop")
      diagnostics.push_back("unknown export format: " + format);

  if (doc.contains("randoop_class"))
    config.randoop_class = doc["randoop_class"].get<std::string>();

  if (doc.contains("sampling")) {
    const auto& sampling = doc["sampling"];
    if (sampling.contains("rate")) {
      config.sampling_rate = sampling["rate"].get<double>();
      if (!(config.sampling_rate > 0.0) || config.sampling_rate > 1.0)
        diagnostics.push_back("sampling.rate must be within (0, 1]");
    }
    if (sampling.contains("seed")) config.seed = sampling["seed"].get<std::uint64_t>();
  }

  if (doc.contains("labels")) {
    config.labels_path = resolve(doc["labels"].get<std::string>());
    if (!std::filesystem::exists(*config.labels_path))
      diagnostics.push_back("labels path does not exist: " + config.labels_path->string());
  }
  if (doc.contains("testcases")) {
    config.testcases_dir = resolve(doc["testcases"].get<std::string>());
    if (!std::filesystem::exists(*config.testcases_dir))
      diagnostics.push_back("testcases path does not exist: " +
                            config.testcases_dir->string());
  }

  if (!diagnostics.empty()) return invalid(std::move(diagnostics));
  ConfigValidation v;
  v.config = std::move(config);
  return v;
}

ConfigValidation validate_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    return invalid({"config file does not exist: " + path.string()});
  nlohmann::json doc = nlohmann::json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) return invalid({"config file is not valid JSON"});
  return validate_config_json(doc, path.parent_path());
}

namespace {

struct PipelineArtifacts {
  std::vector<std::filesystem::path> files;

  void add(const std::filesystem::path& path) { files.push_back(path); }
};

std::unique_ptr<ChatClient> make_chat_client(const Config& config) {
  if (!config.llm_endpoint.empty())
    return std::make_unique<HttpChatClient>(config.llm_endpoint);
  return std::make_unique<MockChatClient>(config.llm_fixtures_dir);
}

std::map<std::string, ValueList> values_by_project_from_inputs(
    const std::vector<InputSet>& sets) {
  std::map<std::string, ValueList> out;
  std::map<std::string, std::set<std::pair<std::string, int>>> seen;
  for (const auto& set : sets)
    for (const auto& [value, kind] : set.unique_values)
      if (seen[set.project].insert({value, static_cast<int>(kind)}).second)
        out[set.project].emplace_back(value, kind);
  return out;
}

std::map<std::string, ValueList> values_by_project_from_refined(
    const std::vector<RefinedInputSet>& sets) {
  std::map<std::string, ValueList> out;
  std::map<std::string, std::set<std::pair<std::string, int>>> seen;
  for (const auto& set : sets)
    for (const auto& [value, kind] : set.inputs)
      if (seen[set.project].insert({value, static_cast<int>(kind)}).second)
        out[set.project].emplace_back(value, kind);
  return out;
}

std::set<std::string> value_strings(const ValueList& values) {
  std::set<std::string> out;
  for (const auto& [value, kind] : values) out.insert(value);
  return out;
}

std::vector<std::string> java_sources_for(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".java")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<std::string> sources;
  for (const auto& path : paths) sources.push_back(read_file(path));
  return sources;
}

}  // namespace

int run_pipeline(const Config& config) {
  const auto& out = config.out_dir;
  std::filesystem::create_directories(out);
  std::filesystem::create_directories(out / "pools");
  PipelineArtifacts artifacts;

  std::string current_stage = "load";
  try {
    log_event({{"event", "pipeline_start"}, {"out_dir", out.string()}});
    Corpus corpus = load_corpus(config.corpus_path);

    current_stage = "segment";
    const auto segments_path = out / "segments.jsonl";
    stage_segment(config.corpus_path, segments_path);
    artifacts.add(segments_path);
    log_event({{"event", "stage_done"}, {"stage", "segment"}});

    current_stage = "extract";
    std::map<ExtractMode, std::filesystem::path> inputs_paths;
    for (ExtractMode mode : config.modes) {
      auto path = out / (std::string("inputs-") + to_string(mode) + ".jsonl");
      stage_extract(segments_path, path, mode, config.javalang_prose);
      inputs_paths[mode] = path;
      artifacts.add(path);
    }
    log_event({{"event", "stage_done"}, {"stage", "extract"}});

    PromptOptions prompt_options;
    prompt_options.model = config.model;
    prompt_options.temperature = config.temperature;
    prompt_options.max_total_tokens = config.max_total_tokens;
    prompt_options.response_reserve = config.response_reserve;

    current_stage = "filter";
    auto client = make_chat_client(config);
    LlmRunOptions run;
    run.parallelism = config.llm_parallelism;
    run.requests_per_minute = config.llm_requests_per_minute;
    auto regex_inputs_it = inputs_paths.find(ExtractMode::RegexPlusJavalang);
    if (regex_inputs_it == inputs_paths.end())
      throw Error(ErrorKind::Config,
                  "the filter stage needs regex+javalang extraction enabled");
    const auto refined_brminer_path = out / "refined-brminer.jsonl";
    stage_filter(config.corpus_path, regex_inputs_it->second, refined_brminer_path,
                 Provenance::BRMiner, *client, prompt_options, config.on_parse_error,
                 run);
    artifacts.add(refined_brminer_path);
    const auto refined_llm_path = out / "refined-llm-alone.jsonl";
    stage_filter(config.corpus_path, regex_inputs_it->second, refined_llm_path,
                 Provenance::LLMAlone, *client, prompt_options, config.on_parse_error,
                 run);
    artifacts.add(refined_llm_path);
    log_event({{"event", "stage_done"}, {"stage", "filter"}});

    current_stage = "classify";
    const auto classifications_path = out / "classifications.jsonl";
    stage_classify(config.corpus_path, classifications_path, *client, prompt_options,
                   run);
    artifacts.add(classifications_path);
    log_event({{"event", "stage_done"}, {"stage", "classify"}});

    current_stage = "metrics";
    auto refined_brminer = load_refined(refined_brminer_path);
    auto refined_llm = load_refined(refined_llm_path);
    auto classifications = load_classifications(classifications_path);

    std::map<std::string, std::vector<RelevanceRow>> table;
    if (config.testcases_dir) {
      std::map<std::string, TokenSet> tc_by_project;
      for (const auto& [project, reports] : corpus.projects) {
        auto dir = *config.testcases_dir / project;
        std::vector<std::string> sources;
        if (std::filesystem::exists(dir)) sources = java_sources_for(dir);
        tc_by_project[project] = testcase_literals(project, sources);
      }

      auto rows_for = [&](const std::map<std::string, ValueList>& by_project) {
        std::vector<RelevanceRow> rows;
        for (const auto& [project, reports] : corpus.projects) {
          TokenSet br = tokenize_reports(project, reports);
          const TokenSet& tc = tc_by_project.at(project);
          long br_tc = static_cast<long>(intersect(br, tc).size());
          ValueList values;
          if (auto it = by_project.find(project); it != by_project.end())
            values = it->second;
          rows.push_back(relevance_row(project, br_tc, value_strings(values), tc.tokens));
        }
        return rows;
      };

      for (ExtractMode mode : config.modes) {
        auto sets = load_input_sets(inputs_paths.at(mode));
        table[mode == ExtractMode::JavalangOnly ? "Javalang Only" : "Regex + Javalang"] =
            rows_for(values_by_project_from_inputs(sets));
      }
      table["BRMiner"] = rows_for(values_by_project_from_refined(refined_brminer));
      table["LLM Alone"] = rows_for(values_by_project_from_refined(refined_llm));
    }

    nlohmann::json metrics_doc;
    metrics_doc["relevance"] = relevance_table_to_json(table);

    std::map<std::string, CategoryCounts> counts_by_project;
    for (const auto& record : classifications) {
      auto& counts = counts_by_project[record.project];
      switch (record.category) {
        case Category::NoInputsMentioned: ++counts.no_inputs; break;
        case Category::ExplicitInputMention: ++counts.explicit_mention; break;
        case Category::ImplicitInputDescription: ++counts.implicit_description; break;
      }
    }
    DistributionReport distribution = category_distribution(counts_by_project);
    {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& row : distribution.per_project)
        rows.push_back({{"explicit", row.counts.explicit_mention},
                        {"explicit_pct", round2(row.explicit_pct)},
                        {"implicit", row.counts.implicit_description},
                        {"implicit_pct", round2(row.implicit_pct)},
                        {"no_inputs", row.counts.no_inputs},
                        {"project", row.project}});
      metrics_doc["distribution"] = {
          {"rows", rows},
          {"total",
           {{"explicit_pct", round2(distribution.total.explicit_pct)},
            {"implicit_pct", round2(distribution.total.implicit_pct)}}},
          {"overall",
           {{"explicit_pct", round2(distribution.overall_explicit_pct)},
            {"implicit_pct", round2(distribution.overall_implicit_pct)},
            {"no_inputs_pct", round2(distribution.overall_no_inputs_pct)}}},
      };
    }

    if (config.labels_path) {
      auto labels = load_human_labels(read_file(*config.labels_path));
      std::map<std::string, std::vector<std::string>> by_category;
      std::map<std::string, const ClassificationRecord*> by_id;
      for (const auto& record : classifications) {
        by_category[to_string(record.category)].push_back(record.report_id);
        by_id[record.report_id] = &record;
      }
      auto sampled = sample(by_category, config.sampling_rate, config.seed);
      std::vector<ClassificationRecord> subset;
      for (const auto& [category, ids] : sampled)
        for (const auto& id : ids) subset.push_back(*by_id.at(id));
      ValidationReport validation = validate(subset, labels);
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& row : validation.per_category)
        rows.push_back({{"accuracy_pct", round2(row.accuracy_pct)},
                        {"category", row.category},
                        {"discrepancy_pct", round2(row.discrepancy_pct)},
                        {"llm_correct", row.llm_correct},
                        {"sample_size", row.sample_size}});
      metrics_doc["validation"] = {
          {"rows", rows},
          {"overall",
           {{"accuracy_pct", round2(validation.overall.accuracy_pct)},
            {"discrepancy_pct", round2(validation.overall.discrepancy_pct)},
            {"llm_correct", validation.overall.llm_correct},
            {"sample_size", validation.overall.sample_size}}},
      };
    }

    const auto metrics_json_path = out / "metrics.json";
    write_file_atomic(metrics_json_path, metrics_doc.dump(2) + "\n");
    artifacts.add(metrics_json_path);
    const auto metrics_md_path = out / "metrics.md";
    write_file_atomic(metrics_md_path, relevance_table_to_markdown(table));
    artifacts.add(metrics_md_path);
    log_event({{"event", "stage_done"}, {"stage", "metrics"}});

    current_stage = "export";
    if (!config.scenarios.empty()) {
      auto extracted = values_by_project_from_inputs(
          load_input_sets(inputs_paths.at(ExtractMode::RegexPlusJavalang)));
      auto brminer_values = values_by_project_from_refined(refined_brminer);
      auto llm_values = values_by_project_from_refined(refined_llm);

      std::vector<std::string> projects;
      for (const auto& [project, reports] : corpus.projects) projects.push_back(project);

      auto formats = config.export_formats;
      auto export_pool = [&](const SeedPool& pool, const std::string& name) {
        for (const auto& format : formats) {
          std::filesystem::path path;
          if (format == "canonical") {
            path = out / "pools" / (name + ".json");
            export_canonical(pool, path);
          } else if (format == "evosuite") {
            path = out / "pools" / (name + ".evosuite.txt");
            export_evosuite(pool, path);
          } else {
            path = out / "pools" / (name + ".randoop.txt");
            export_randoop(pool, config.randoop_class, path);
          }
          artifacts.add(path);
        }
      };

      for (PoolScenario scenario : config.scenarios) {
        if (scenario_is_project_scoped(scenario)) {
          for (const auto& project : projects) {
            SeedPool pool = build_pool(extracted, brminer_values, llm_values, scenario,
                                       project);
            export_pool(pool, std::string(to_string(scenario)) + "-" + project);
          }
        } else {
          SeedPool pool = build_pool(extracted, brminer_values, llm_values, scenario);
          export_pool(pool, to_string(scenario));
        }
      }

      const auto plan_path = out / "experiment-manifest.json";
      emit_experiment_manifest(projects, config.scenarios,
                               config.corpus_path.filename().string(), "pools",
                               plan_path);
      artifacts.add(plan_path);
    }
    log_event({{"event", "stage_done"}, {"stage", "export"}});

    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& path : artifacts.files)
      hashes[std::filesystem::relative(path, out).generic_string()] =
          sha256_hex(read_file(path));
    write_file_atomic(out / "hashes.json", hashes.dump(2) + "\n");
    log_event({{"event", "pipeline_done"}, {"artifacts", artifacts.files.size()}});
    return 0;
  } catch (const Error& e) {
    log_event({{"event", "stage_failed"}, {"stage", current_stage}, {"error", e.what()}});
    return 1;
  } catch (const std::exception& e) {
    log_event({{"event", "stage_failed"}, {"stage", current_stage}, {"error", e.what()}});
    return 1;
  }
}

}  // namespace brminer
