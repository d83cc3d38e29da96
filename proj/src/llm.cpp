#include "brminer/llm.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/util.hpp"

namespace brminer {

namespace {

const char* kToTLLMAlone =
    "Imagine three different software engineering experts working on maintaining a "
    "software project hosted on GitHub or Jira. Their task is to analyze a bug report, "
    "specifically its Title, Description, and Comments, to identify potential test "
    "inputs that can trigger the described bug.\n"
    "Consider the following bug report with title [Title]. Below is the description of "
    "the bug report:[Description].\n"
    "Here are the comments associated with the bug report: [Comments]\n"
    "Each expert should propose potential inputs classified as String, Float, Integer, "
    "that could be relevant for triggering the bug. They must discuss the relevance of "
    "these inputs and discard any that are deemed irrelevant. Finally, they should "
    "compile a list of relevant inputs in the following JSON format for ease of use:\n"
    "[JSON_FORMAT]\n"
    "Please ensure the complete JSON file is placed between the three quotes ``` ``` "
    "for easy extraction.";

const char* kToTBRMiner =
    "Imagine three different software engineering experts working on maintaining a "
    "software project hosted on GitHub or Jira. Their task is to analyze the contents "
    "of a bug report, including its Title, Description, and Comments, to determine "
    "potential test inputs that could be used to trigger the described bug.\n"
    "Consider the following bug report with title [Title]. Below is the description of "
    "the bug report: [Description].\n"
    "Here are the comments associated with the bug report: [Comments]\n"
    "The following inputs have been automatically extracted from this bug report: "
    "[INPUTS-LIST].\n"
    "The experts must analyze both the bug report and these extracted inputs, then "
    "select relevant inputs classified as String, Float, Integer. They should discuss "
    "the relevance of all chosen inputs, discarding any that are deemed irrelevant. "
    "Finally, they should compile a complete list of relevant inputs in the following "
    "JSON format:\n"
    "[JSON_FORMAT]\n"
    "Please ensure the complete JSON file is placed between the three quotes ``` ``` "
    "for easy extraction.";

const char* kCoTClassify =
    "You are a software engineering expert responsible for analyzing bug reports for "
    "maintenance purpose. Your task is to analyze bug reports, specifically Title, "
    "Description, and Comments, to identify potential test inputs that can trigger the "
    "described bug. For each bug report, you must analyze the content, detect the "
    "intentions in the bug reports, and classify each bug report into one of the "
    "following categories:\n"
    "1. No Inputs Mentioned: The bug report does not reference any specific input(s) "
    "triggering the bug.\n"
    "2. Explicit Input Mention: Specific input values (e.g., strings, numbers, or "
    "variable values) are directly mentioned in the bug report.\n"
    "3. Implicit Input Description: Input values are not directly mentioned or are "
    "vague. In this case no specific input value is mentioned, but it implies an issue "
    "with invalid input handling.\n"
    "For each report provide your classification in JSON format. Include the following "
    "fields in your response:\n"
    "category: The classification category (\"No Inputs Mentioned,\" \"Explicit Input "
    "Mention,\" or \"Implicit Input Description\").\n"
    "inputs: A list of inputs if explicitly mentioned, or \"None\" if no inputs are "
    "referenced.\n"
    "Here is how you must format the response: [JSON_FORMAT].\n"
    "Consider the following bug report with title [Title]. Below is the description of "
    "the bug report: [Description].\n"
    "Here are the comments associated with the bug report: [Comments]\n"
    "Please ensure the complete JSON file is placed between the three quotes ``` ``` "
    "for easy extraction.";

const char* kToTJsonFormat =
    "{\n"
    "  \"inputs\": [\n"
    "    {\"type\": \"String\", \"value\": \"example\"},\n"
    "    {\"type\": \"Integer\", \"value\": 42},\n"
    "    {\"type\": \"Float\", \"value\": 3.14}\n"
    "  ]\n"
    "}";

const char* kCoTJsonFormat =
    "{\n"
    "  \"category\": \"No Inputs Mentioned\" | \"Explicit Input Mention\" | \"Implicit "
    "Input Description\",\n"
    "  \"inputs\": [\"...\"] | \"None\"\n"
    "}";

std::string replace_all(std::string text, std::string_view needle,
                        std::string_view replacement) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), replacement);
    pos += replacement.size();
  }
  return text;
}

// Single pass over the template: placeholders inside substituted slot
// values are never re-expanded.
std::string render_template(std::string_view body,
                            const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '[') {
      bool replaced = false;
      for (const auto& [placeholder, value] : slots) {
        if (body.substr(i, placeholder.size()) == placeholder) {
          out += value;
          i += placeholder.size();
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += body[i++];
  }
  return out;
}

// Never cut a UTF-8 code point in half when byte-truncating.
std::size_t utf8_safe_cut(std::string_view text, std::size_t limit) {
  if (limit >= text.size()) return text.size();
  while (limit > 0 && (static_cast<unsigned char>(text[limit]) & 0xc0) == 0x80) --limit;
  return limit;
}

std::string join_comments(const std::vector<std::string>& comments) {
  std::string out;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    if (i) out += '\n';
    out += "Comment " + std::to_string(i + 1) + ": " + comments[i];
  }
  return out;
}

std::string render_inputs_list(const InputSet& inputs, std::size_t cap) {
  std::string out;
  std::size_t listed = 0;
  for (const auto& [value, kind] : inputs.unique_values) {
    if (listed == cap) break;
    if (listed) out += '\n';
    switch (kind) {
      case ValueKind::String: out += "String: \"" + value + "\""; break;
      case ValueKind::Integer: out += "Integer: " + value; break;
      case ValueKind::Float: out += "Float: " + value; break;
    }
    ++listed;
  }
  return out;
}

// Trims whole lines from the end until the list fits in `limit` bytes.
std::string trim_list_to(std::string list, std::size_t limit) {
  while (list.size() > limit) {
    std::size_t cut = list.rfind('\n');
    if (cut == std::string::npos) return "";
    list.resize(cut);
  }
  return list;
}

struct FenceBlock {
  std::string content;
};

std::vector<FenceBlock> fenced_blocks(const std::string& raw) {
  std::vector<FenceBlock> blocks;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = raw.find("```", pos);
    if (open == std::string::npos) break;
    std::size_t content_start = open + 3;
    // A language tag directly after the opening fence is not content.
    std::size_t line_end = raw.find('\n', content_start);
    if (line_end != std::string::npos) {
      bool tag_only = true;
      for (std::size_t i = content_start; i < line_end; ++i)
        if (!std::isalnum(static_cast<unsigned char>(raw[i]))) tag_only = false;
      if (tag_only && line_end > content_start) content_start = line_end + 1;
    }
    std::size_t close = raw.find("```", content_start);
    if (close == std::string::npos) break;
    blocks.push_back({raw.substr(content_start, close - content_start)});
    pos = close + 3;
  }
  return blocks;
}

std::string coerce_value(const nlohmann::json& value, ValueKind kind) {
  switch (kind) {
    case ValueKind::String:
      if (value.is_string()) return value.get<std::string>();
      if (value.is_number_integer()) return canonical_integer(value.get<long long>());
      if (value.is_number_float()) return canonical_float(value.get<double>());
      if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
      throw Error(ErrorKind::BadSchema, "string input has non-scalar value");
    case ValueKind::Integer: {
      if (value.is_number_integer()) return canonical_integer(value.get<long long>());
      if (value.is_string()) {
        const std::string text = value.get<std::string>();
        char* end = nullptr;
        long long parsed = std::strtoll(text.c_str(), &end, 10);
        if (end && *end == '\0' && !text.empty()) return canonical_integer(parsed);
      }
      throw Error(ErrorKind::BadSchema, "integer input has non-integer value");
    }
    case ValueKind::Float: {
      if (value.is_number()) return canonical_float(value.get<double>());
      if (value.is_string()) {
        const std::string text = value.get<std::string>();
        char* end = nullptr;
        double parsed = std::strtod(text.c_str(), &end);
        if (end && *end == '\0' && !text.empty() && std::isfinite(parsed))
          return canonical_float(parsed);
      }
      throw Error(ErrorKind::BadSchema, "float input has non-numeric value");
    }
  }
  throw Error(ErrorKind::BadSchema, "unknown input kind");
}

nlohmann::json first_json_in_fences(const std::string& raw) {
  auto blocks = fenced_blocks(raw);
  if (blocks.empty()) throw Error(ErrorKind::NoFence, "response has no ``` fence");
  for (const auto& block : blocks) {
    nlohmann::json value = nlohmann::json::parse(block.content, nullptr, false);
    if (!value.is_discarded()) return value;
  }
  throw Error(ErrorKind::BadJson, "no fenced block parses as JSON");
}

std::string normalize_category(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

}  // namespace

const char* to_string(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::ToT_BRMiner: return "ToT_BRMiner";
    case PromptTemplate::ToT_LLMAlone: return "ToT_LLMAlone";
    case PromptTemplate::CoT_Classify: return "CoT_Classify";
  }
  return "?";
}

const char* to_string(Provenance p) {
  return p == Provenance::BRMiner ? "brminer" : "llm-alone";
}

Provenance provenance_from_string(const std::string& text) {
  if (text == "brminer") return Provenance::BRMiner;
  if (text == "llm-alone") return Provenance::LLMAlone;
  throw Error(ErrorKind::Config, "unknown provenance '" + text + "'");
}

const char* to_string(Category c) {
  switch (c) {
    case Category::NoInputsMentioned: return "No Inputs Mentioned";
    case Category::ExplicitInputMention: return "Explicit Input Mention";
    case Category::ImplicitInputDescription: return "Implicit Input Description";
  }
  return "?";
}

Category category_from_string(const std::string& text) {
  const std::string normalized = normalize_category(text);
  if (normalized == "no inputs mentioned") return Category::NoInputsMentioned;
  if (normalized == "explicit input mention") return Category::ExplicitInputMention;
  if (normalized == "implicit input description" || normalized == "implicit input")
    return Category::ImplicitInputDescription;
  throw Error(ErrorKind::UnknownCategory, "unrecognized category '" + text + "'");
}

const char* template_text(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::ToT_BRMiner: return kToTBRMiner;
    case PromptTemplate::ToT_LLMAlone: return kToTLLMAlone;
    case PromptTemplate::CoT_Classify: return kCoTClassify;
  }
  return "";
}

int estimate_tokens(std::string_view text) {
  return static_cast<int>((text.size() + 3) / 4);
}

PromptSpec build_prompt(const BugReport& report, const InputSet* inputs,
                        PromptTemplate t, const PromptOptions& options) {
  const bool wants_inputs = t == PromptTemplate::ToT_BRMiner;
  if (wants_inputs && inputs == nullptr)
    throw Error(ErrorKind::Config, "ToT_BRMiner prompt requires an extracted input set");
  if (!wants_inputs && inputs != nullptr)
    throw Error(ErrorKind::Config,
                std::string(to_string(t)) + " prompt does not take an inputs list");

  std::string body = template_text(t);
  const char* json_format =
      t == PromptTemplate::CoT_Classify ? kCoTJsonFormat : kToTJsonFormat;
  body = replace_all(std::move(body), "[JSON_FORMAT]", json_format);

  const std::string comments = join_comments(report.comments);
  std::string inputs_list =
      wants_inputs ? render_inputs_list(*inputs, options.max_listed_inputs) : "";

  // Scaffolding is everything that is not slot content. The budget is in
  // bytes because the estimator is ceil(bytes/4).
  std::string scaffold = replace_all(body, "[Title]", "");
  scaffold = replace_all(std::move(scaffold), "[Description]", "");
  scaffold = replace_all(std::move(scaffold), "[Comments]", "");
  scaffold = replace_all(std::move(scaffold), "[INPUTS-LIST]", "");

  const long prompt_tokens = options.max_total_tokens - options.response_reserve;
  const long budget_bytes = prompt_tokens * 4L;
  long remaining = budget_bytes - static_cast<long>(scaffold.size());

  if (remaining < static_cast<long>(report.title.size()))
    throw Error(ErrorKind::BudgetExceeded,
                "title alone exceeds the prompt budget for report " + report.id);
  remaining -= static_cast<long>(report.title.size());

  // Drop order: inputs list first, then comments, then description. A
  // field is cut only once everything below it is gone.
  std::string description = report.description.substr(
      0, utf8_safe_cut(report.description, static_cast<std::size_t>(std::max(0L, remaining))));
  remaining -= static_cast<long>(description.size());
  std::string kept_comments = comments.substr(
      0, utf8_safe_cut(comments, static_cast<std::size_t>(std::max(0L, remaining))));
  remaining -= static_cast<long>(kept_comments.size());
  inputs_list = trim_list_to(std::move(inputs_list),
                             static_cast<std::size_t>(std::max(0L, remaining)));

  PromptSpec spec;
  spec.template_id = t;
  spec.report_id = report.id;
  spec.project = report.project;
  spec.model = options.model;
  spec.temperature = options.temperature;
  spec.max_total_tokens = options.max_total_tokens;
  spec.response_reserve = options.response_reserve;
  spec.slots["[Title]"] = report.title;
  spec.slots["[Description]"] = description;
  spec.slots["[Comments]"] = kept_comments;
  spec.slots["[INPUTS-LIST]"] = inputs_list;
  spec.rendered = render_template(body, spec.slots);
  if (!wants_inputs) spec.slots.erase("[INPUTS-LIST]");
  spec.slots["[JSON_FORMAT]"] = json_format;
  return spec;
}

MockChatClient::MockChatClient(std::filesystem::path root) : root_(std::move(root)) {}

std::string MockChatClient::complete_raw(const PromptSpec& spec) {
  auto path = root_ / to_string(spec.template_id) / (spec.report_id + ".txt");
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::NotFound, "no recorded response at " + path.string());
  return read_file(path);
}

HttpChatClient::HttpChatClient(std::string endpoint_url, std::string api_key)
    : api_key_(std::move(api_key)) {
  auto scheme_end = endpoint_url.find("://");
  std::size_t path_start = endpoint_url.find(
      '/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = endpoint_url;
    path_ = "/";
  } else {
    base_ = endpoint_url.substr(0, path_start);
    path_ = endpoint_url.substr(path_start);
  }
  if (api_key_.empty()) {
    if (const char* env = std::getenv("BRMINER_LLM_KEY")) api_key_ = env;
  }
}

std::string HttpChatClient::complete_raw(const PromptSpec& spec) {
  httplib::Client client(base_);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  nlohmann::json request{
      {"model", spec.model},
      {"temperature", spec.temperature},
      {"messages", nlohmann::json::array({nlohmann::json{
                       {"role", "user"}, {"content", spec.rendered}}})},
  };
  auto result = client.Post(path_, headers, request.dump(), "application/json");
  if (!result)
    throw Error(ErrorKind::Transport, "completion request failed: " +
                                          httplib::to_string(result.error()));
  if (result->status == 401 || result->status == 403)
    throw Error(ErrorKind::Auth, "completion endpoint rejected credentials");
  if (result->status == 404)
    throw Error(ErrorKind::NotFound, "completion endpoint path not found");
  if (result->status == 429)
    throw Error(ErrorKind::RateLimited, "completion endpoint rate limited");
  if (result->status == 400 &&
      result->body.find("context_length") != std::string::npos)
    throw Error(ErrorKind::BudgetExceeded, "completion endpoint rejected token count");
  if (result->status != 200)
    throw Error(ErrorKind::Transport,
                "completion endpoint returned status " + std::to_string(result->status));

  nlohmann::json response = nlohmann::json::parse(result->body, nullptr, false);
  if (response.is_discarded() || !response.contains("choices") ||
      response["choices"].empty())
    throw Error(ErrorKind::Transport, "completion response has no choices");
  return response["choices"][0]["message"]["content"].get<std::string>();
}

RateLimiter::RateLimiter(int requests_per_minute)
    : next_slot_(std::chrono::steady_clock::now()) {
  if (requests_per_minute > 0)
    interval_ = std::chrono::milliseconds(60000 / requests_per_minute);
}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    slot = std::max(next_slot_, std::chrono::steady_clock::now());
    next_slot_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::string complete(const PromptSpec& spec, ChatClient& client,
                     const CompleteOptions& options) {
  log_event({{"event", "llm_request"},
             {"report_id", spec.report_id},
             {"template", to_string(spec.template_id)},
             {"prompt_tokens", estimate_tokens(spec.rendered)}});
  int delay_ms = options.backoff_ms;
  for (int attempt = 0;; ++attempt) {
    try {
      std::string raw = client.complete_raw(spec);
      log_event({{"event", "llm_response"},
                 {"report_id", spec.report_id},
                 {"bytes", raw.size()}});
      return raw;
    } catch (const Error& e) {
      const bool transient =
          e.kind() == ErrorKind::Transport || e.kind() == ErrorKind::RateLimited;
      if (!transient || attempt >= options.max_retries) throw;
      log_event({{"event", "llm_retry"},
                 {"report_id", spec.report_id},
                 {"attempt", attempt + 1},
                 {"error", e.what()}});
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
  }
}

RefinedPayload parse_refined(const std::string& raw) {
  nlohmann::json value = first_json_in_fences(raw);
  if (!value.is_object() || !value.contains("inputs") || !value["inputs"].is_array())
    throw Error(ErrorKind::BadSchema, "fenced JSON lacks an \"inputs\" array");
  RefinedPayload payload;
  for (const auto& item : value["inputs"]) {
    if (!item.is_object() || !item.contains("type") || !item.contains("value"))
      throw Error(ErrorKind::BadSchema, "input entry needs \"type\" and \"value\"");
    ValueKind kind = value_kind_from_string(item["type"].get<std::string>());
    payload.inputs.emplace_back(coerce_value(item["value"], kind), kind);
  }
  return payload;
}

std::string render_refined_response(
    const std::vector<std::pair<std::string, ValueKind>>& inputs) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [value, kind] : inputs) {
    nlohmann::json item{{"type", to_string(kind)}};
    if (kind == ValueKind::String) {
      item["value"] = value;
    } else if (kind == ValueKind::Integer) {
      char* end = nullptr;
      long long parsed = std::strtoll(value.c_str(), &end, 10);
      if (end && *end == '\0' && !value.empty()) item["value"] = parsed;
      else item["value"] = value;
    } else {
      item["value"] = std::strtod(value.c_str(), nullptr);
    }
    list.push_back(std::move(item));
  }
  nlohmann::json doc{{"inputs", std::move(list)}};
  return "```\n" + doc.dump(2) + "\n```";
}

RefinedInputSet refine(const BugReport& report, const InputSet* extracted,
                       Provenance provenance, ChatClient& client,
                       const PromptOptions& prompt_options,
                       const CompleteOptions& complete_options,
                       ParseErrorPolicy on_parse_error) {
  const PromptTemplate t = provenance == Provenance::BRMiner
                               ? PromptTemplate::ToT_BRMiner
                               : PromptTemplate::ToT_LLMAlone;
  PromptSpec spec = build_prompt(
      report, provenance == Provenance::BRMiner ? extracted : nullptr, t,
      prompt_options);

  RefinedInputSet result;
  result.report_id = report.id;
  result.project = report.project;
  result.provenance = provenance;
  result.raw_response = complete(spec, client, complete_options);
  try {
    result.inputs = parse_refined(result.raw_response).inputs;
  } catch (const Error& e) {
    result.parse_failed = true;
    log_event({{"event", "llm_parse_error"},
               {"report_id", report.id},
               {"error", e.what()}});
    if (on_parse_error == ParseErrorPolicy::Passthrough &&
        provenance == Provenance::BRMiner && extracted != nullptr)
      result.inputs = extracted->unique_values;
  }
  return result;
}

ClassificationRecord classify(const BugReport& report, ChatClient& client,
                              const PromptOptions& prompt_options,
                              const CompleteOptions& complete_options) {
  PromptSpec spec =
      build_prompt(report, nullptr, PromptTemplate::CoT_Classify, prompt_options);
  const std::string raw = complete(spec, client, complete_options);

  nlohmann::json value = first_json_in_fences(raw);
  if (!value.is_object() || !value.contains("category"))
    throw Error(ErrorKind::BadSchema, "classification JSON lacks \"category\"");

  ClassificationRecord record;
  record.report_id = report.id;
  record.project = report.project;
  record.category = category_from_string(value["category"].get<std::string>());

  if (record.category != Category::NoInputsMentioned && value.contains("inputs") &&
      value["inputs"].is_array()) {
    std::vector<std::string> inputs;
    for (const auto& item : value["inputs"]) {
      if (item.is_string()) inputs.push_back(item.get<std::string>());
      else if (item.is_number_integer()) inputs.push_back(canonical_integer(item.get<long long>()));
      else if (item.is_number_float()) inputs.push_back(canonical_float(item.get<double>()));
    }
    record.inputs = std::move(inputs);
  }
  return record;
}

nlohmann::json refined_to_json(const RefinedInputSet& set) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [value, kind] : set.inputs)
    inputs.push_back({{"kind", to_string(kind)}, {"value", value}});
  return {
      {"inputs", inputs},
      {"parse_failed", set.parse_failed},
      {"project", set.project},
      {"provenance", to_string(set.provenance)},
      {"raw_response", set.raw_response},
      {"report_id", set.report_id},
  };
}

RefinedInputSet refined_from_json(const nlohmann::json& value) {
  RefinedInputSet set;
  set.report_id = value.at("report_id").get<std::string>();
  set.project = value.at("project").get<std::string>();
  set.provenance = provenance_from_string(value.at("provenance").get<std::string>());
  set.raw_response = value.value("raw_response", "");
  set.parse_failed = value.value("parse_failed", false);
  for (const auto& item : value.at("inputs"))
    set.inputs.emplace_back(item.at("value").get<std::string>(),
                            value_kind_from_string(item.at("kind").get<std::string>()));
  return set;
}

nlohmann::json classification_to_json(const ClassificationRecord& record) {
  nlohmann::json j{
      {"category", to_string(record.category)},
      {"project", record.project},
      {"report_id", record.report_id},
  };
  if (record.inputs) j["inputs"] = *record.inputs;
  else j["inputs"] = nullptr;
  return j;
}

ClassificationRecord classification_from_json(const nlohmann::json& value) {
  ClassificationRecord record;
  record.report_id = value.at("report_id").get<std::string>();
  record.project = value.at("project").get<std::string>();
  record.category = category_from_string(value.at("category").get<std::string>());
  // NoInputsMentioned always carries the None sentinel.
  if (record.category != Category::NoInputsMentioned && value.contains("inputs") &&
      value.at("inputs").is_array())
    record.inputs = value.at("inputs").get<std::vector<std::string>>();
  return record;
}

}  // namespace brminer
