#include <cctype>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/fetch.hpp"
#include "brminer/metrics.hpp"
#include "brminer/pipeline.hpp"
#include "brminer/util.hpp"

using namespace brminer;

namespace {

std::unique_ptr<ChatClient> client_from_flags(const std::string& fixtures,
                                              const std::string& endpoint,
                                              bool allow_network) {
  if (!endpoint.empty()) {
    if (!allow_network)
      throw Error(ErrorKind::Config, "live endpoints require --allow-network");
    return std::make_unique<HttpChatClient>(endpoint);
  }
  if (fixtures.empty())
    throw Error(ErrorKind::Config, "pass --fixtures DIR or --endpoint URL");
  return std::make_unique<MockChatClient>(fixtures);
}

std::map<std::string, ValueList> project_values_from_input_files(
    const std::vector<std::string>& paths, ExtractMode wanted) {
  std::map<std::string, ValueList> out;
  std::map<std::string, std::set<std::pair<std::string, int>>> seen;
  for (const auto& path : paths) {
    for (const auto& set : load_input_sets(path)) {
      if (set.mode != wanted) continue;
      for (const auto& [value, kind] : set.unique_values)
        if (seen[set.project].insert({value, static_cast<int>(kind)}).second)
          out[set.project].emplace_back(value, kind);
    }
  }
  return out;
}

std::map<std::string, ValueList> project_values_from_refined_files(
    const std::vector<std::string>& paths, Provenance wanted) {
  std::map<std::string, ValueList> out;
  std::map<std::string, std::set<std::pair<std::string, int>>> seen;
  for (const auto& path : paths) {
    for (const auto& set : load_refined(path)) {
      if (set.provenance != wanted) continue;
      for (const auto& [value, kind] : set.inputs)
        if (seen[set.project].insert({value, static_cast<int>(kind)}).second)
          out[set.project].emplace_back(value, kind);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brminer: mine, refine and export test inputs from bug reports"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  bool allow_network = false;
  app.add_option("--config", config_path, "pipeline configuration file");
  app.add_option("--out-dir", out_dir_override, "override the configured output directory");
  app.add_option("--seed", seed_override, "override the sampling seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_flag("--allow-network", allow_network, "permit live HTTP calls");

  // fetch
  auto* fetch_cmd = app.add_subcommand("fetch", "pull bug reports from GitHub or Jira");
  std::string github_slug, jira_url, jira_project, fetch_out = "corpus.jsonl";
  int page_limit = 10;
  std::string state = "all";
  fetch_cmd->add_option("--github", github_slug, "owner/name repository slug");
  fetch_cmd->add_option("--jira-url", jira_url, "Jira base URL");
  fetch_cmd->add_option("--jira-project", jira_project, "Jira project key");
  fetch_cmd->add_option("--out", fetch_out, "corpus JSONL to write");
  fetch_cmd->add_option("--page-limit", page_limit, "GitHub pages to fetch");
  fetch_cmd->add_option("--state", state, "all (default) or open issues only");

  // segment
  auto* segment_cmd = app.add_subcommand("segment", "split reports into code and prose");
  std::string seg_in, seg_out = "segments.jsonl";
  segment_cmd->add_option("--in", seg_in, "corpus JSONL")->required();
  segment_cmd->add_option("--out", seg_out, "segments JSONL to write");

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "mine literal candidates");
  std::string ext_in, ext_out = "inputs.jsonl", ext_mode = "regex+javalang";
  std::string javalang_prose = "scan";
  extract_cmd->add_option("--in", ext_in, "segments JSONL")->required();
  extract_cmd->add_option("--out", ext_out, "inputs JSONL to write");
  extract_cmd->add_option("--mode", ext_mode, "javalang or regex+javalang");
  extract_cmd->add_option("--javalang-prose", javalang_prose,
                          "scan (default) or skip prose in javalang mode");

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "refine inputs through the LLM stage");
  std::string flt_corpus, flt_inputs, flt_out = "refined.jsonl";
  std::string flt_provenance = "brminer", flt_fixtures, flt_endpoint;
  std::string on_parse_error = "empty";
  filter_cmd->add_option("--corpus", flt_corpus, "corpus JSONL")->required();
  filter_cmd->add_option("--inputs", flt_inputs, "extracted inputs JSONL (brminer mode)");
  filter_cmd->add_option("--out", flt_out, "refined JSONL to write");
  filter_cmd->add_option("--provenance", flt_provenance, "brminer or llm-alone");
  filter_cmd->add_option("--fixtures", flt_fixtures, "recorded response directory");
  filter_cmd->add_option("--endpoint", flt_endpoint, "chat-completion endpoint URL");
  filter_cmd->add_option("--on-parse-error", on_parse_error, "empty or passthrough");

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "categorize input mentions");
  std::string cls_corpus, cls_out = "classifications.jsonl", cls_fixtures, cls_endpoint;
  classify_cmd->add_option("--corpus", cls_corpus, "corpus JSONL")->required();
  classify_cmd->add_option("--out", cls_out, "classification JSONL to write");
  classify_cmd->add_option("--fixtures", cls_fixtures, "recorded response directory");
  classify_cmd->add_option("--endpoint", cls_endpoint, "chat-completion endpoint URL");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "relevance tables from stage outputs");
  std::string met_corpus, met_testcases, met_report = "metrics.json";
  std::vector<std::string> met_inputs, met_refined;
  bool met_fold_case = false;
  metrics_cmd->add_option("--corpus", met_corpus, "corpus JSONL")->required();
  metrics_cmd->add_option("--inputs", met_inputs, "extracted inputs JSONL (repeatable)");
  metrics_cmd->add_option("--refined", met_refined, "refined JSONL (repeatable)");
  metrics_cmd->add_option("--testcases", met_testcases, "per-project test sources dir")
      ->required();
  metrics_cmd->add_option("--report", met_report, "metrics.json or metrics.md");
  metrics_cmd->add_flag("--fold-case", met_fold_case,
                        "lower-case tokens and values before matching");

  // export
  auto* export_cmd = app.add_subcommand("export", "write a seed pool file");
  std::string exp_scenario, exp_project, exp_format = "canonical", exp_out;
  std::string exp_class = "seeds.PoolLiterals";
  std::vector<std::string> exp_inputs, exp_refined;
  export_cmd->add_option("--scenario", exp_scenario, "NoLit..AllLitLLMOnly")->required();
  export_cmd->add_option("--project", exp_project, "project key for Proj* scenarios");
  export_cmd->add_option("--format", exp_format, "canonical, evosuite or randoop");
  export_cmd->add_option("--out", exp_out, "output path")->required();
  export_cmd->add_option("--inputs", exp_inputs, "extracted inputs JSONL (repeatable)");
  export_cmd->add_option("--refined", exp_refined, "refined JSONL (repeatable)");
  export_cmd->add_option("--class-name", exp_class, "class for randoop blocks");
  std::size_t exp_cap = 0;
  export_cmd->add_option("--cap", exp_cap,
                         "keep only the first N sorted entries (0 = all)");

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "emit the experiment manifest");
  std::vector<std::string> plan_scenarios, plan_projects;
  std::string plan_corpus = "corpus.jsonl", plan_pools = "pools", plan_out = "manifest.json";
  plan_cmd->add_option("--scenarios", plan_scenarios, "scenario names")->required();
  plan_cmd->add_option("--projects", plan_projects, "project keys")->required();
  plan_cmd->add_option("--corpus-ref", plan_corpus, "corpus reference recorded in the plan");
  plan_cmd->add_option("--pools-dir", plan_pools, "directory the pool files live in");
  plan_cmd->add_option("--out", plan_out, "manifest path");

  // pipeline + validate-config
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage end-to-end");
  auto* validate_cmd = app.add_subcommand("validate-config", "check a configuration file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fetch_cmd) {
      FetchOptions options;
      options.page_limit = page_limit;
      options.include_closed = state != "open";
      if (!allow_network)
        throw Error(ErrorKind::Config, "fetch is a live operation; pass --allow-network");
      Corpus corpus;
      if (!github_slug.empty())
        for (auto& report : fetch_github(github_slug, options))
          corpus.insert(std::move(report));
      if (!jira_url.empty() && !jira_project.empty())
        for (auto& report : fetch_jira(jira_url, jira_project, options))
          corpus.insert(std::move(report));
      if (corpus.projects.empty() && github_slug.empty() && jira_url.empty())
        throw Error(ErrorKind::Config, "pass --github or --jira-url/--jira-project");
      save_corpus(corpus, fetch_out);
      std::cout << "wrote " << corpus.report_count() << " reports to " << fetch_out << "\n";
    } else if (*segment_cmd) {
      stage_segment(seg_in, seg_out);
      std::cout << "wrote " << seg_out << "\n";
    } else if (*extract_cmd) {
      stage_extract(ext_in, ext_out, extract_mode_from_string(ext_mode),
                    javalang_prose == "skip" ? ProseHandling::Skip : ProseHandling::Scan);
      std::cout << "wrote " << ext_out << "\n";
    } else if (*filter_cmd) {
      auto client = client_from_flags(flt_fixtures, flt_endpoint, allow_network);
      Provenance provenance = provenance_from_string(flt_provenance);
      if (provenance == Provenance::BRMiner && flt_inputs.empty())
        throw Error(ErrorKind::Config, "brminer filtering needs --inputs");
      stage_filter(flt_corpus, flt_inputs, flt_out, provenance, *client, PromptOptions{},
                   on_parse_error == "passthrough" ? ParseErrorPolicy::Passthrough
                                                   : ParseErrorPolicy::Empty);
      std::cout << "wrote " << flt_out << "\n";
    } else if (*classify_cmd) {
      auto client = client_from_flags(cls_fixtures, cls_endpoint, allow_network);
      stage_classify(cls_corpus, cls_out, *client, PromptOptions{});
      std::cout << "wrote " << cls_out << "\n";
    } else if (*metrics_cmd) {
      Corpus corpus = load_corpus(met_corpus);
      std::map<std::string, std::vector<RelevanceRow>> table;
      std::map<std::string, TokenSet> tc_by_project;
      for (const auto& [project, reports] : corpus.projects) {
        std::vector<std::string> sources;
        auto dir = std::filesystem::path(met_testcases) / project;
        if (std::filesystem::exists(dir)) {
          std::vector<std::filesystem::path> files;
          for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".java")
              files.push_back(entry.path());
          std::sort(files.begin(), files.end());
          for (const auto& file : files) sources.push_back(read_file(file));
        }
        tc_by_project[project] = testcase_literals(project, sources);
      }
      if (met_fold_case)
        for (auto& [project, tc] : tc_by_project) tc = fold_case(std::move(tc));
      auto rows_for = [&](const std::map<std::string, ValueList>& by_project) {
        std::vector<RelevanceRow> rows;
        for (const auto& [project, reports] : corpus.projects) {
          TokenSet br = tokenize_reports(project, reports);
          if (met_fold_case) br = fold_case(std::move(br));
          const TokenSet& tc = tc_by_project.at(project);
          long br_tc = static_cast<long>(intersect(br, tc).size());
          std::set<std::string> values;
          if (auto it = by_project.find(project); it != by_project.end())
            for (const auto& [value, kind] : it->second) {
              std::string value_text = value;
              if (met_fold_case)
                for (char& c : value_text)
                  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
              values.insert(std::move(value_text));
            }
          rows.push_back(relevance_row(project, br_tc, values, tc.tokens));
        }
        return rows;
      };
      table["Javalang Only"] =
          rows_for(project_values_from_input_files(met_inputs, ExtractMode::JavalangOnly));
      table["Regex + Javalang"] = rows_for(
          project_values_from_input_files(met_inputs, ExtractMode::RegexPlusJavalang));
      table["BRMiner"] =
          rows_for(project_values_from_refined_files(met_refined, Provenance::BRMiner));
      table["LLM Alone"] =
          rows_for(project_values_from_refined_files(met_refined, Provenance::LLMAlone));
      if (met_report.ends_with(".md")) {
        write_file_atomic(met_report, relevance_table_to_markdown(table));
      } else {
        write_file_atomic(met_report, relevance_table_to_json(table).dump(2) + "\n");
      }
      std::cout << "wrote " << met_report << "\n";
    } else if (*export_cmd) {
      PoolScenario scenario = pool_scenario_from_string(exp_scenario);
      auto extracted =
          project_values_from_input_files(exp_inputs, ExtractMode::RegexPlusJavalang);
      auto brm = project_values_from_refined_files(exp_refined, Provenance::BRMiner);
      auto llm = project_values_from_refined_files(exp_refined, Provenance::LLMAlone);
      std::optional<std::string> project;
      if (!exp_project.empty()) project = exp_project;
      SeedPool pool = build_pool(extracted, brm, llm, scenario, project);
      if (exp_cap > 0 && pool.entries.size() > exp_cap) pool.entries.resize(exp_cap);
      if (exp_format == "canonical") export_canonical(pool, exp_out);
      else if (exp_format == "evosuite") export_evosuite(pool, exp_out);
      else if (exp_format == "randoop") export_randoop(pool, exp_class, exp_out);
      else throw Error(ErrorKind::Config, "unknown export format " + exp_format);
      std::cout << "wrote " << exp_out << " (" << pool.entries.size() << " entries)\n";
    } else if (*plan_cmd) {
      std::vector<PoolScenario> scenarios;
      for (const auto& name : plan_scenarios)
        scenarios.push_back(pool_scenario_from_string(name));
      emit_experiment_manifest(plan_projects, scenarios, plan_corpus, plan_pools, plan_out);
      std::cout << "wrote " << plan_out << "\n";
    } else if (*pipeline_cmd || *validate_cmd) {
      if (config_path.empty())
        throw Error(ErrorKind::Config, "pass --config with a configuration file");
      ConfigValidation validation = validate_config(config_path);
      if (!validation.diagnostics.empty()) {
        for (const auto& diagnostic : validation.diagnostics)
          std::cout << "config: " << diagnostic << "\n";
        return 2;
      }
      if (*validate_cmd) {
        std::cout << "config ok\n";
        return 0;
      }
      Config config = *validation.config;
      if (!out_dir_override.empty()) config.out_dir = out_dir_override;
      if (seed_set) config.seed = seed_override;
      config.allow_network = allow_network;
      if (!config.llm_endpoint.empty() && !allow_network)
        throw Error(ErrorKind::Config,
                    "config names a live endpoint; pass --allow-network to use it");
      int status = run_pipeline(config);
      if (status == 0)
        std::cout << "pipeline ok: " << config.out_dir.string() << "\n";
      else
        std::cout << "pipeline failed; see the event log\n";
      return status;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
