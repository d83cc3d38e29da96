#include "brminer/fetch.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/util.hpp"

namespace brminer {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  if (!fallback.empty()) return fallback;
  if (const char* value = std::getenv(name)) return value;
  return "";
}

std::unique_ptr<httplib::Client> make_client(const std::string& base_url) {
  auto client = std::make_unique<httplib::Client>(base_url);
  client->set_connection_timeout(10);
  client->set_read_timeout(60);
  client->set_follow_location(true);
  return client;
}

// GET with the corpus retry policy: up to `max_retries` extra attempts on
// 429/5xx, backoff doubling from `backoff_ms`.
httplib::Result get_with_retry(httplib::Client& client, const std::string& path,
                               const httplib::Headers& headers,
                               const FetchOptions& options) {
  int delay_ms = options.backoff_ms;
  int attempt = 0;
  while (true) {
    auto result = client.Get(path, headers);
    bool retryable = false;
    if (!result) {
      retryable = true;
    } else if (result->status == 429 || result->status >= 500) {
      retryable = true;
    }
    if (!retryable || attempt >= options.max_retries) return result;
    log_event({{"event", "fetch_retry"},
               {"path", path},
               {"attempt", attempt + 1},
               {"status", result ? result->status : -1}});
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    delay_ms *= 2;
    ++attempt;
  }
}

[[noreturn]] void throw_for_status(int status, const std::string& what) {
  if (status == 401 || status == 403)
    throw Error(ErrorKind::Auth, what + " rejected credentials (" + std::to_string(status) + ")");
  if (status == 404) throw Error(ErrorKind::NotFound, what + " not found");
  if (status == 429)
    throw Error(ErrorKind::RateLimited, what + " still rate limited after retries");
  throw Error(ErrorKind::Transport,
              what + " returned status " + std::to_string(status));
}

nlohmann::json get_json(httplib::Client& client, const std::string& path,
                        const httplib::Headers& headers, const FetchOptions& options,
                        const std::string& what) {
  auto result = get_with_retry(client, path, headers, options);
  if (!result)
    throw Error(ErrorKind::Transport,
                what + " unreachable: " + httplib::to_string(result.error()));
  if (result->status != 200) throw_for_status(result->status, what);
  nlohmann::json value = nlohmann::json::parse(result->body, nullptr, false);
  if (value.is_discarded())
    throw Error(ErrorKind::Transport, what + " returned unparseable JSON");
  return value;
}

}  // namespace

std::vector<BugReport> fetch_github(const std::string& repo_slug,
                                    const FetchOptions& options) {
  auto slash = repo_slug.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == repo_slug.size())
    throw Error(ErrorKind::Config, "repo slug must look like owner/name");

  const std::string base =
      options.base_url.empty() ? "https://api.github.com" : options.base_url;
  const std::string token = env_or("BRMINER_GITHUB_TOKEN", options.token);
  httplib::Headers headers{{"Accept", "application/vnd.github+json"},
                           {"User-Agent", "brminer"}};
  if (!token.empty()) headers.emplace("Authorization", "token " + token);

  struct IssueStub {
    BugReport report;
    long comment_count = 0;
    std::string number;
  };
  std::vector<IssueStub> stubs;

  auto client = make_client(base);
  const std::string state = options.include_closed ? "all" : "open";
  for (int page = 1; page <= options.page_limit; ++page) {
    std::string path = "/repos/" + repo_slug + "/issues?state=" + state +
                       "&per_page=" + std::to_string(options.per_page) +
                       "&page=" + std::to_string(page);
    nlohmann::json issues = get_json(*client, path, headers, options, "github issues");
    if (!issues.is_array())
      throw Error(ErrorKind::Transport, "github issues endpoint returned a non-array");
    if (issues.empty()) break;
    for (const auto& issue : issues) {
      if (issue.contains("pull_request")) continue;  // issues only
      IssueStub stub;
      stub.number = std::to_string(issue.at("number").get<long>());
      stub.report.id = stub.number;
      stub.report.project = repo_slug;
      stub.report.source = Source::GitHub;
      stub.report.title = issue.value("title", "");
      if (issue.contains("body") && issue["body"].is_string())
        stub.report.description = issue["body"].get<std::string>();
      stub.comment_count = issue.value("comments", 0L);
      stubs.push_back(std::move(stub));
    }
    if (static_cast<int>(issues.size()) < options.per_page) break;
  }

  parallel_for(stubs.size(), options.parallelism, [&](std::size_t i) {
    if (stubs[i].comment_count == 0) return;
    auto worker = make_client(base);
    for (int page = 1; page <= std::max(1, options.page_limit); ++page) {
      std::string path = "/repos/" + repo_slug + "/issues/" + stubs[i].number +
                         "/comments?per_page=" + std::to_string(options.per_page) +
                         "&page=" + std::to_string(page);
      nlohmann::json comments =
          get_json(*worker, path, headers, options, "github comments");
      for (const auto& comment : comments)
        if (comment.contains("body") && comment["body"].is_string())
          stubs[i].report.comments.push_back(comment["body"].get<std::string>());
      if (static_cast<int>(comments.size()) < options.per_page) break;
    }
  });

  std::vector<BugReport> reports;
  reports.reserve(stubs.size());
  for (auto& stub : stubs) reports.push_back(std::move(stub.report));
  log_event({{"event", "fetch_github_done"},
             {"repo", repo_slug},
             {"reports", reports.size()}});
  return reports;
}

std::vector<BugReport> fetch_jira(const std::string& base_url,
                                  const std::string& project_key,
                                  const FetchOptions& options) {
  const std::string token = env_or("BRMINER_JIRA_TOKEN", options.token);
  const std::string user = env_or("BRMINER_JIRA_USER", options.user);
  httplib::Headers headers{{"Accept", "application/json"}, {"User-Agent", "brminer"}};

  auto client = make_client(base_url);
  if (!user.empty() && !token.empty()) client->set_basic_auth(user, token);

  std::vector<BugReport> reports;
  std::vector<std::string> keys;
  long start_at = 0;
  while (true) {
    std::string path = "/rest/api/2/search?jql=project%3D" + project_key +
                       "&startAt=" + std::to_string(start_at) +
                       "&maxResults=" + std::to_string(options.per_page) +
                       "&fields=summary,description";
    nlohmann::json page = get_json(*client, path, headers, options, "jira search");
    const auto& issues = page.at("issues");
    for (const auto& issue : issues) {
      BugReport report;
      report.id = issue.at("key").get<std::string>();
      report.project = project_key;
      report.source = Source::Jira;
      const auto& fields = issue.at("fields");
      report.title = fields.value("summary", "");
      if (fields.contains("description") && fields["description"].is_string())
        report.description = html_to_text(fields["description"].get<std::string>());
      keys.push_back(report.id);
      reports.push_back(std::move(report));
    }
    start_at += static_cast<long>(issues.size());
    long total = page.value("total", start_at);
    if (issues.empty() || start_at >= total) break;
  }

  parallel_for(reports.size(), options.parallelism, [&](std::size_t i) {
    auto worker = make_client(base_url);
    if (!user.empty() && !token.empty()) worker->set_basic_auth(user, token);
    std::string path = "/rest/api/2/issue/" + keys[i] + "/comment";
    nlohmann::json payload = get_json(*worker, path, headers, options, "jira comments");
    if (!payload.contains("comments")) return;
    for (const auto& comment : payload["comments"])
      if (comment.contains("body") && comment["body"].is_string())
        reports[i].comments.push_back(html_to_text(comment["body"].get<std::string>()));
  });

  log_event({{"event", "fetch_jira_done"},
             {"project", project_key},
             {"reports", reports.size()}});
  return reports;
}

namespace {

std::string decode_entities(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '&') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string::npos || semi - i > 10) {
      out.push_back(text[i++]);
      continue;
    }
    std::string name = text.substr(i + 1, semi - i - 1);
    if (name == "amp") out.push_back('&');
    else if (name == "lt") out.push_back('<');
    else if (name == "gt") out.push_back('>');
    else if (name == "quot") out.push_back('"');
    else if (name == "apos") out.push_back('\'');
    else if (name == "nbsp") out.push_back(' ');
    else if (!name.empty() && name[0] == '#') {
      long code = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                      ? std::strtol(name.c_str() + 2, nullptr, 16)
                      : std::strtol(name.c_str() + 1, nullptr, 10);
      if (code > 0 && code < 128) out.push_back(static_cast<char>(code));
      else { out.append(text, i, semi - i + 1); }
    } else {
      out.append(text, i, semi - i + 1);
      i = semi + 1;
      continue;
    }
    i = semi + 1;
  }
  return out;
}

std::string lowercase(std::string text) {
  for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return text;
}

}  // namespace

std::string html_to_text(const std::string& html) {
  std::string out;
  out.reserve(html.size());
  std::size_t i = 0;
  bool in_fence = false;
  while (i < html.size()) {
    if (html[i] != '<') {
      out.push_back(html[i++]);
      continue;
    }
    std::size_t close = html.find('>', i + 1);
    if (close == std::string::npos) {
      out.push_back(html[i++]);
      continue;
    }
    std::string tag = lowercase(html.substr(i + 1, close - i - 1));
    bool closing = !tag.empty() && tag[0] == '/';
    std::string name = closing ? tag.substr(1) : tag;
    auto space = name.find_first_of(" \t/");
    if (space != std::string::npos) name.resize(space);

    // Fenced regions survive as {code} blocks so the segmenter can still
    // tell them apart from prose.
    if (name == "pre" || name == "code") {
      if (!closing && !in_fence) {
        out += "\n{code}\n";
        in_fence = true;
      } else if (closing && in_fence) {
        out += "\n{code}\n";
        in_fence = false;
      }
    } else if (name == "br" || name == "p" || name == "div" || name == "li" ||
               name == "tr") {
      if (!out.empty() && out.back() != '\n') out.push_back('\n');
    }
    i = close + 1;
  }
  std::string text = decode_entities(out);
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
  std::size_t lead = 0;
  while (lead < text.size() && (text[lead] == '\n' || text[lead] == ' ')) ++lead;
  return text.substr(lead);
}

}  // namespace brminer
