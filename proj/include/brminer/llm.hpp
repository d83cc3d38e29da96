#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brminer/extract.hpp"
#include "brminer/report.hpp"

namespace brminer {

enum class PromptTemplate { ToT_BRMiner, ToT_LLMAlone, CoT_Classify };
enum class Provenance { BRMiner, LLMAlone };
enum class Category { NoInputsMentioned, ExplicitInputMention, ImplicitInputDescription };

const char* to_string(PromptTemplate t);
const char* to_string(Provenance p);
const char* to_string(Category c);
Provenance provenance_from_string(const std::string& text);

/// Case-insensitive match against the three category names used in the
/// classification prompt; throws Error(UnknownCategory) otherwise.
Category category_from_string(const std::string& text);

/// Raw template text with [Title]/[Description]/[Comments]/[INPUTS-LIST]/
/// [JSON_FORMAT] placeholders.
const char* template_text(PromptTemplate t);

/// ceil(bytes / 4); cheap stand-in for a subword tokenizer, monotone in
/// input length and never off by more than the 4x bound the budget
/// arithmetic assumes.
int estimate_tokens(std::string_view text);

struct PromptOptions {
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  int max_total_tokens = 4096;  // shared by prompt and response
  int response_reserve = 512;
  std::size_t max_listed_inputs = 200;
};

struct PromptSpec {
  PromptTemplate template_id = PromptTemplate::ToT_BRMiner;
  std::string report_id;
  std::string project;
  std::string model;
  double temperature = 0.7;
  int max_total_tokens = 4096;
  int response_reserve = 512;
  std::map<std::string, std::string> slots;  // placeholder -> substituted text
  std::string rendered;                      // final prompt
};

/// Substitutes the report (and, for ToT_BRMiner, its extracted inputs)
/// into the template under the token budget. When the budget is tight the
/// inputs list is trimmed first, then comments, then the description; the
/// title is never cut; if even the title cannot fit, this throws
/// Error(BudgetExceeded).
PromptSpec build_prompt(const BugReport& report, const InputSet* inputs,
                        PromptTemplate t, const PromptOptions& options = {});

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete_raw(const PromptSpec& spec) = 0;
};

/// Replays recorded responses from `<root>/<template>/<report_id>.txt`.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::filesystem::path root);
  std::string complete_raw(const PromptSpec& spec) override;

 private:
  std::filesystem::path root_;
};

/// Single-turn chat-completion endpoint speaking the usual
/// {model, temperature, messages:[{role,content}]} request shape.
class HttpChatClient : public ChatClient {
 public:
  /// `endpoint_url` is the full completion URL, e.g.
  /// "https://api.openai.com/v1/chat/completions". The key falls back to
  /// the BRMINER_LLM_KEY environment variable.
  explicit HttpChatClient(std::string endpoint_url, std::string api_key = "");
  std::string complete_raw(const PromptSpec& spec) override;

 private:
  std::string base_;
  std::string path_;
  std::string api_key_;
};

struct CompleteOptions {
  int max_retries = 3;
  int backoff_ms = 1000;  // doubled per attempt: 1s, 2s, 4s
};

/// Spaces out request starts to respect a requests-per-minute ceiling;
/// 0 disables throttling. Safe to share across completion workers.
class RateLimiter {
 public:
  explicit RateLimiter(int requests_per_minute);
  void acquire();

 private:
  std::chrono::milliseconds interval_{0};
  std::chrono::steady_clock::time_point next_slot_;
  std::mutex mutex_;
};

/// Runs one completion with bounded retry on transport/rate-limit
/// failures; request and response are logged with the report id.
std::string complete(const PromptSpec& spec, ChatClient& client,
                     const CompleteOptions& options = {});

struct RefinedPayload {
  std::vector<std::pair<std::string, ValueKind>> inputs;
};

/// Pulls the first well-formed JSON document out of a ``` fence and maps
/// it through the {"inputs":[{"type","value"},...]} schema. Values are
/// coerced to the same canonical renderings the extractor uses.
RefinedPayload parse_refined(const std::string& raw);

/// Inverse of parse_refined for fixtures and tests: builds a fenced JSON
/// response whose parse yields exactly `inputs`.
std::string render_refined_response(
    const std::vector<std::pair<std::string, ValueKind>>& inputs);

struct RefinedInputSet {
  std::string report_id;
  std::string project;
  Provenance provenance = Provenance::BRMiner;
  std::vector<std::pair<std::string, ValueKind>> inputs;
  std::string raw_response;  // stored verbatim for replay
  bool parse_failed = false;
};

enum class ParseErrorPolicy { Empty, Passthrough };

/// One report through the filtering stage: build the ToT prompt, complete,
/// parse. On unparseable output the refined set defaults to empty
/// (Passthrough keeps the extracted inputs instead, BRMiner provenance
/// only) and the failure is recorded on the result.
RefinedInputSet refine(const BugReport& report, const InputSet* extracted,
                       Provenance provenance, ChatClient& client,
                       const PromptOptions& prompt_options = {},
                       const CompleteOptions& complete_options = {},
                       ParseErrorPolicy on_parse_error = ParseErrorPolicy::Empty);

struct ClassificationRecord {
  std::string report_id;
  std::string project;
  Category category = Category::NoInputsMentioned;
  std::optional<std::vector<std::string>> inputs;  // absent for NoInputsMentioned

  bool operator==(const ClassificationRecord&) const = default;
};

ClassificationRecord classify(const BugReport& report, ChatClient& client,
                              const PromptOptions& prompt_options = {},
                              const CompleteOptions& complete_options = {});

nlohmann::json refined_to_json(const RefinedInputSet& set);
RefinedInputSet refined_from_json(const nlohmann::json& value);
nlohmann::json classification_to_json(const ClassificationRecord& record);
ClassificationRecord classification_from_json(const nlohmann::json& value);

}  // namespace brminer
