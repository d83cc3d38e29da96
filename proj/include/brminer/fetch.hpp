#pragma once

#include <string>
#include <vector>

#include "brminer/report.hpp"

namespace brminer {

struct FetchOptions {
  std::string base_url;  // override for tests; empty picks the public API
  std::string token;     // falls back to BRMINER_GITHUB_TOKEN / BRMINER_JIRA_TOKEN
  std::string user;      // Jira basic auth, falls back to BRMINER_JIRA_USER
  int page_limit = 10;
  int per_page = 100;
  bool include_closed = true;  // state=all; the tracker default is open-only
  int max_retries = 3;
  int backoff_ms = 1000;  // 1s, 2s, 4s
  int parallelism = 4;    // concurrent per-issue comment fetches
};

/// Issues (never pull requests) of `owner/name`, comments included,
/// paginated up to page_limit pages. 429/5xx responses are retried with
/// backoff before surfacing as RateLimited/Transport.
std::vector<BugReport> fetch_github(const std::string& repo_slug,
                                    const FetchOptions& options = {});

/// Issues of a Jira project via the REST search endpoint; comments are
/// fetched per issue. HTML bodies are flattened to text with <pre>/<code>
/// regions kept as {code} blocks.
std::vector<BugReport> fetch_jira(const std::string& base_url,
                                  const std::string& project_key,
                                  const FetchOptions& options = {});

std::string html_to_text(const std::string& html);

}  // namespace brminer
