#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/llm.hpp"
#include "brminer/segment.hpp"
#include "brminer/util.hpp"
#include "support.hpp"

using namespace brminer;

namespace {

struct Quiet {
  Quiet() { set_log_sink([](const std::string&) {}); }
  ~Quiet() { set_log_sink(nullptr); }
};

BugReport sample_report() {
  BugReport report;
  report.id = "auth-212";
  report.project = "acme-auth";
  report.title = "Error when password contains special characters";
  report.description = "The password \"secure&#9pass\" is rejected.";
  report.comments = {"First comment.", "Second comment."};
  return report;
}

InputSet sample_inputs() {
  BugReport report = sample_report();
  return extract(segment(report), ExtractMode::RegexPlusJavalang);
}

class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::string response) : response_(std::move(response)) {}
  std::string complete_raw(const PromptSpec&) override { return response_; }

 private:
  std::string response_;
};

class FailingClient : public ChatClient {
 public:
  explicit FailingClient(int failures, std::string then = "")
      : failures_(failures), then_(std::move(then)) {}
  std::string complete_raw(const PromptSpec&) override {
    ++calls;
    if (calls <= failures_) throw Error(ErrorKind::Transport, "scripted failure");
    if (then_.empty()) throw Error(ErrorKind::Transport, "scripted failure");
    return then_;
  }
  int calls = 0;

 private:
  int failures_;
  std::string then_;
};

PromptOptions fast_options() { return PromptOptions{}; }

using VK = std::pair<std::string, ValueKind>;

}  // namespace

TEST_CASE("templates carry their identifying instructions") {
  InputSet inputs = sample_inputs();
  BugReport report = sample_report();

  PromptSpec brm = build_prompt(report, &inputs, PromptTemplate::ToT_BRMiner);
  CHECK(brm.rendered.find("The following inputs have been automatically extracted") !=
        std::string::npos);
  CHECK(brm.rendered.find("three different software engineering experts") !=
        std::string::npos);

  PromptSpec alone = build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone);
  CHECK(alone.rendered.find("Each expert should propose potential inputs") !=
        std::string::npos);

  PromptSpec cot = build_prompt(report, nullptr, PromptTemplate::CoT_Classify);
  CHECK(cot.rendered.find("No Inputs Mentioned") != std::string::npos);
  CHECK(cot.rendered.find("Explicit Input Mention") != std::string::npos);
  CHECK(cot.rendered.find("Implicit Input Description") != std::string::npos);
  CHECK(cot.rendered.find("category:") != std::string::npos);
  CHECK(cot.rendered.find("inputs:") != std::string::npos);
}

TEST_CASE("slots are substituted and no placeholder survives") {
  InputSet inputs = sample_inputs();
  BugReport report = sample_report();
  for (auto t : {PromptTemplate::ToT_BRMiner, PromptTemplate::ToT_LLMAlone,
                 PromptTemplate::CoT_Classify}) {
    PromptSpec spec =
        build_prompt(report, t == PromptTemplate::ToT_BRMiner ? &inputs : nullptr, t);
    CHECK(spec.rendered.find(report.title) != std::string::npos);
    CHECK(spec.rendered.find(report.description) != std::string::npos);
    CHECK(spec.rendered.find("Comment 1: First comment.") != std::string::npos);
    for (const char* placeholder : {"[Title]", "[Description]", "[Comments]",
                                    "[INPUTS-LIST]", "[JSON_FORMAT]"})
      CHECK(spec.rendered.find(placeholder) == std::string::npos);
  }
  PromptSpec brm = build_prompt(report, &inputs, PromptTemplate::ToT_BRMiner);
  CHECK(brm.rendered.find("String: \"secure&#9pass\"") != std::string::npos);
  CHECK(brm.model == "gpt-3.5-turbo");
  CHECK(brm.temperature == doctest::Approx(0.7));
}

TEST_CASE("template preconditions on the inputs slot") {
  BugReport report = sample_report();
  InputSet inputs = sample_inputs();
  CHECK_THROWS_AS(build_prompt(report, nullptr, PromptTemplate::ToT_BRMiner), Error);
  CHECK_THROWS_AS(build_prompt(report, &inputs, PromptTemplate::ToT_LLMAlone), Error);
  CHECK_THROWS_AS(build_prompt(report, &inputs, PromptTemplate::CoT_Classify), Error);
}

TEST_CASE("token estimate is ceil(bytes/4) and monotone") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("abcdefgh") == 2);
  CHECK(estimate_tokens("abc") == 1);
  std::string text;
  int last = 0;
  for (int i = 0; i < 64; ++i) {
    text.push_back('x');
    int now = estimate_tokens(text);
    CHECK(now >= last);
    last = now;
  }
}

TEST_CASE("estimate stays within 4x of a subword-style reference count") {
  // Reference: one token per run of up to 4 characters between
  // whitespace/punctuation boundaries, which over-counts real tokenizers.
  auto reference_tokens = [](const std::string& text) {
    int count = 0;
    std::size_t run = 0;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        if (++run == 4) {
          ++count;
          run = 0;
        }
      } else {
        if (run) ++count;
        run = 0;
        if (!std::isspace(static_cast<unsigned char>(c))) ++count;
      }
    }
    if (run) ++count;
    return count;
  };
  testsupport::LiteralFuzzer fuzzer(5150);
  BugReport report = sample_report();
  InputSet inputs = sample_inputs();
  for (int i = 0; i < 50; ++i) {
    report.description = fuzzer.random_string_value(2000);
    PromptSpec spec = build_prompt(report, &inputs, PromptTemplate::ToT_BRMiner);
    int reference = reference_tokens(spec.rendered);
    CHECK(estimate_tokens(spec.rendered) * 4 >= reference);
  }
}

TEST_CASE("budget: oversized comments are cut, title and description stay") {
  BugReport report = sample_report();
  report.comments = {std::string(100000, 'c')};
  PromptSpec spec = build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone);
  CHECK(estimate_tokens(spec.rendered) + spec.response_reserve <= spec.max_total_tokens);
  CHECK(spec.rendered.find(report.title) != std::string::npos);
  CHECK(spec.rendered.find(report.description) != std::string::npos);
  CHECK(spec.slots.at("[Comments]").size() < 100000);
}

TEST_CASE("budget: inputs list is dropped before comments are touched") {
  BugReport report = sample_report();
  report.comments = {std::string(12000, 'c')};  // close to the byte budget
  InputSet inputs;
  inputs.report_id = report.id;
  for (int i = 0; i < 150; ++i)
    inputs.unique_values.emplace_back("value-" + std::to_string(i) + std::string(20, 'v'),
                                      ValueKind::String);
  PromptSpec spec = build_prompt(report, &inputs, PromptTemplate::ToT_BRMiner);
  // Comments survive in full; the list gave way first.
  CHECK(spec.slots.at("[Comments]").find(std::string(12000, 'c')) != std::string::npos);
  CHECK(spec.slots.at("[INPUTS-LIST]").size() <
        150 * 25u);  // visibly trimmed
  CHECK(estimate_tokens(spec.rendered) + spec.response_reserve <= spec.max_total_tokens);
}

TEST_CASE("budget: a title that cannot fit raises BudgetExceeded") {
  BugReport report = sample_report();
  report.title = std::string(20000, 't');
  CHECK_THROWS_AS(build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone), Error);
}

TEST_CASE("placeholder text inside a field is not re-expanded") {
  BugReport report = sample_report();
  report.title = "parser chokes on [Description] markers";
  report.description = "plain body";
  PromptSpec spec = build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone);
  // The bracketed text survives verbatim; the real description slot is
  // still substituted exactly once.
  CHECK(spec.rendered.find("chokes on [Description] markers") != std::string::npos);
  CHECK(spec.rendered.find("plain body") != std::string::npos);
  CHECK(estimate_tokens(spec.rendered) + spec.response_reserve <= spec.max_total_tokens);
}

TEST_CASE("property: 500 random reports always respect the budget") {
  testsupport::LiteralFuzzer fuzzer(31337);
  auto& rng = fuzzer.rng();
  int built = 0;
  int exceeded = 0;
  for (int round = 0; round < 500; ++round) {
    BugReport report;
    report.id = "r" + std::to_string(round);
    report.project = "p";
    report.title = fuzzer.random_string_value(rng() % 2 ? 200 : 20000);
    report.description = fuzzer.random_string_value(rng() % 200000);
    std::size_t comments = rng() % 4;
    for (std::size_t c = 0; c < comments; ++c)
      report.comments.push_back(fuzzer.random_string_value(rng() % 60000));
    try {
      PromptSpec spec = build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone);
      ++built;
      CHECK(estimate_tokens(spec.rendered) + 512 <= 4096);
      CHECK(spec.rendered.find(report.title) != std::string::npos);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BudgetExceeded);
      ++exceeded;
    }
  }
  CHECK(built > 0);
  CHECK(exceeded > 0);  // the 20k titles must trip it
}

TEST_CASE("parse_refined: fenced payloads") {
  auto payload = parse_refined(
      "chatter before\n```\n{\"inputs\":[{\"type\":\"String\",\"value\":\"secure&#9pass\"}]}\n```\n");
  CHECK(payload.inputs == std::vector<VK>{{"secure&#9pass", ValueKind::String}});

  CHECK(parse_refined("```\n{\"inputs\":[]}\n```").inputs.empty());

  // Language-tagged fence and numeric coercion.
  auto tagged = parse_refined(
      "```json\n{\"inputs\":[{\"type\":\"Integer\",\"value\":31},"
      "{\"type\":\"Float\",\"value\":1e-3}]}\n```");
  CHECK(tagged.inputs == std::vector<VK>{{"31", ValueKind::Integer},
                                         {"0.001", ValueKind::Float}});
}

TEST_CASE("parse_refined error taxonomy") {
  try {
    parse_refined("no fence at all");
    FAIL("expected NoFence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoFence);
  }
  try {
    parse_refined("```\nnot json\n```");
    FAIL("expected BadJson");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadJson);
  }
  try {
    parse_refined("```\n{\"other\": 1}\n```");
    FAIL("expected BadSchema");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadSchema);
  }
}

TEST_CASE("parse_refined: first well-formed JSON fence wins") {
  std::string raw =
      "```\nbroken {\n```\nmore text\n```\n{\"inputs\":[{\"type\":\"Integer\",\"value\":5}]}\n```\n"
      "```\n{\"inputs\":[{\"type\":\"Integer\",\"value\":9}]}\n```";
  auto payload = parse_refined(raw);
  CHECK(payload.inputs == std::vector<VK>{{"5", ValueKind::Integer}});
}

TEST_CASE("property: parse_refined inverts render_refined_response") {
  testsupport::LiteralFuzzer fuzzer(2024);
  for (int round = 0; round < 100; ++round) {
    std::vector<VK> inputs;
    std::size_t n = fuzzer.rng()() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      switch (fuzzer.rng()() % 3) {
        case 0: inputs.emplace_back(fuzzer.random_string_value(), ValueKind::String); break;
        case 1:
          inputs.push_back({canonical_integer(static_cast<long long>(fuzzer.rng()() % 100000)),
                            ValueKind::Integer});
          break;
        default:
          inputs.push_back({canonical_float(static_cast<double>(fuzzer.rng()() % 1000) / 8.0),
                            ValueKind::Float});
      }
    }
    auto parsed = parse_refined(render_refined_response(inputs));
    CHECK(parsed.inputs == inputs);
  }
}

TEST_CASE("mock client replays the recorded fixture for the report id") {
  Quiet quiet;
  MockChatClient client(testsupport::fixtures_dir() / "llm");
  BugReport report = sample_report();
  InputSet inputs = sample_inputs();
  PromptSpec spec = build_prompt(report, &inputs, PromptTemplate::ToT_BRMiner);
  std::string raw = complete(spec, client);
  CHECK(raw.find("secure&#9pass") != std::string::npos);
  auto payload = parse_refined(raw);
  CHECK(payload.inputs == std::vector<VK>{{"secure&#9pass", ValueKind::String}});

  PromptSpec unknown = spec;
  unknown.report_id = "missing-id";
  CHECK_THROWS_AS(complete(unknown, client, {0, 1}), Error);
}

TEST_CASE("complete retries transient failures then surfaces the error") {
  Quiet quiet;
  BugReport report = sample_report();
  PromptSpec spec = build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone);

  FailingClient always(999);
  try {
    complete(spec, always, {3, 1});
    FAIL("expected TransportError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transport);
  }
  CHECK(always.calls == 4);  // 1 + 3 retries

  FailingClient recovers(2, "```\n{\"inputs\":[]}\n```");
  CHECK(complete(spec, recovers, {3, 1}).find("inputs") != std::string::npos);
  CHECK(recovers.calls == 3);
}

TEST_CASE("http client speaks the chat-completion wire shape") {
  Quiet quiet;
  httplib::Server server;
  std::atomic<int> hits{0};
  nlohmann::json seen;
  std::mutex seen_mutex;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    {
      std::lock_guard<std::mutex> lock(seen_mutex);
      seen = nlohmann::json::parse(req.body);
    }
    nlohmann::json body{{"choices", {{{"message", {{"role", "assistant"},
                                                    {"content", "```\n{\"inputs\":[]}\n```"}}}}}}};
    res.set_content(body.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  auto thread = std::thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpChatClient client("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions",
                        "test-key");
  BugReport report = sample_report();
  PromptSpec spec = build_prompt(report, nullptr, PromptTemplate::ToT_LLMAlone);
  std::string raw = complete(spec, client, {0, 1});
  CHECK(raw == "```\n{\"inputs\":[]}\n```");
  CHECK(hits == 1);
  {
    std::lock_guard<std::mutex> lock(seen_mutex);
    CHECK(seen.at("model") == "gpt-3.5-turbo");
    CHECK(seen.at("temperature").get<double>() == doctest::Approx(0.7));
    REQUIRE(seen.at("messages").size() == 1);
    CHECK(seen["messages"][0]["role"] == "user");
    CHECK(seen["messages"][0]["content"].get<std::string>() == spec.rendered);
  }

  server.stop();
  thread.join();
}

TEST_CASE("refine applies the parse-error policy") {
  Quiet quiet;
  BugReport report = sample_report();
  InputSet inputs = sample_inputs();

  ScriptedClient garbage("no json here");
  RefinedInputSet empty = refine(report, &inputs, Provenance::BRMiner, garbage,
                                 fast_options(), {0, 1}, ParseErrorPolicy::Empty);
  CHECK(empty.parse_failed);
  CHECK(empty.inputs.empty());
  CHECK(empty.raw_response == "no json here");

  RefinedInputSet kept = refine(report, &inputs, Provenance::BRMiner, garbage,
                                fast_options(), {0, 1}, ParseErrorPolicy::Passthrough);
  CHECK(kept.parse_failed);
  CHECK(kept.inputs == inputs.unique_values);

  ScriptedClient good(render_refined_response({{"secure&#9pass", ValueKind::String}}));
  RefinedInputSet ok = refine(report, &inputs, Provenance::BRMiner, good, fast_options(),
                              {0, 1}, ParseErrorPolicy::Empty);
  CHECK(!ok.parse_failed);
  CHECK(ok.inputs == std::vector<VK>{{"secure&#9pass", ValueKind::String}});
  CHECK(ok.provenance == Provenance::BRMiner);
}

TEST_CASE("classify maps categories case-insensitively") {
  Quiet quiet;
  BugReport report = sample_report();

  ScriptedClient none("```\n{\"category\":\"No Inputs Mentioned\",\"inputs\":\"None\"}\n```");
  ClassificationRecord record = classify(report, none, fast_options(), {0, 1});
  CHECK(record.category == Category::NoInputsMentioned);
  CHECK(!record.inputs.has_value());

  ScriptedClient explicit_mention(
      "```\n{\"category\":\"explicit input mention\",\"inputs\":[\"5\"]}\n```");
  record = classify(report, explicit_mention, fast_options(), {0, 1});
  CHECK(record.category == Category::ExplicitInputMention);
  REQUIRE(record.inputs.has_value());
  CHECK(*record.inputs == std::vector<std::string>{"5"});

  ScriptedClient weird("```\n{\"category\":\"Weird\"}\n```");
  try {
    classify(report, weird, fast_options(), {0, 1});
    FAIL("expected UnknownCategory");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownCategory);
  }
}

TEST_CASE("classification and refined sets round-trip through JSON") {
  ClassificationRecord record;
  record.report_id = "r";
  record.project = "p";
  record.category = Category::ExplicitInputMention;
  record.inputs = std::vector<std::string>{"a", "5"};
  CHECK(classification_from_json(classification_to_json(record)) == record);

  RefinedInputSet set;
  set.report_id = "r";
  set.project = "p";
  set.provenance = Provenance::LLMAlone;
  set.inputs = {{"x", ValueKind::String}, {"7", ValueKind::Integer}};
  set.raw_response = "raw";
  RefinedInputSet back = refined_from_json(refined_to_json(set));
  CHECK(back.report_id == set.report_id);
  CHECK(back.inputs == set.inputs);
  CHECK(back.provenance == set.provenance);
  CHECK(back.raw_response == set.raw_response);
}
