#include "brminer/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/extract.hpp"
#include "brminer/util.hpp"

namespace brminer {

namespace {

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_';
}

bool all_digits(std::string_view text) {
  if (text.empty()) return false;
  for (char c : text)
    if (c < '0' || c > '9') return false;
  return true;
}

void tokenize_text_into(std::string_view text, std::set<std::string>& out) {
  // Reuses the prose scanner so quoted strings and numbers normalize the
  // same way everywhere, then word-splits the uncovered remainder.
  LexResult lexed = regex_text_literals(text);
  std::vector<std::pair<std::size_t, std::size_t>> covered;
  for (const auto& input : lexed.inputs) {
    out.insert(input.value);
    covered.emplace_back(input.start, input.end);
  }
  std::sort(covered.begin(), covered.end());

  std::size_t pos = 0;
  // Word tokens are the non-numeric [A-Za-z0-9_] runs left over once
  // quotes and numbers are consumed. Pure-digit leftovers belong to runs
  // the number rule rejected (versions, glued digits) and are dropped.
  auto emit_words = [&](std::string_view chunk) {
    std::size_t i = 0;
    while (i < chunk.size()) {
      if (!is_word_char(chunk[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < chunk.size() && is_word_char(chunk[j])) ++j;
      std::string_view word = chunk.substr(i, j - i);
      if (!all_digits(word)) out.insert(std::string(word));
      i = j;
    }
  };
  for (const auto& [start, end] : covered) {
    if (start > pos) emit_words(text.substr(pos, start - pos));
    pos = std::max(pos, end);
  }
  if (pos < text.size()) emit_words(text.substr(pos));
}

}  // namespace

void tokenize_report_into(const BugReport& report, std::set<std::string>& out) {
  tokenize_text_into(report.title, out);
  tokenize_text_into(report.description, out);
  for (const auto& comment : report.comments) tokenize_text_into(comment, out);
}

TokenSet tokenize_reports(const std::string& project,
                          const std::vector<BugReport>& reports) {
  TokenSet set{project, {}};
  for (const auto& report : reports) tokenize_report_into(report, set.tokens);
  return set;
}

TokenSet testcase_literals(const std::string& project,
                           const std::vector<std::string>& test_sources) {
  TokenSet set{project, {}};
  for (const auto& source : test_sources) {
    LexResult lexed = lex_code_literals(source);
    for (const auto& input : lexed.inputs) set.tokens.insert(input.value);
  }
  return set;
}

std::set<std::string> intersect(const TokenSet& a, const TokenSet& b) {
  if (a.project != b.project)
    throw Error(ErrorKind::KeyMismatch,
                "cannot intersect projects '" + a.project + "' and '" + b.project + "'");
  std::set<std::string> out;
  std::set_intersection(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                        b.tokens.end(), std::inserter(out, out.begin()));
  return out;
}

TokenSet fold_case(TokenSet set) {
  std::set<std::string> folded;
  for (const auto& token : set.tokens) {
    std::string lower = token;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    folded.insert(std::move(lower));
  }
  set.tokens = std::move(folded);
  return set;
}

RelevanceRow relevance_row_from_counts(const std::string& project, long br_tc,
                                       long brm_tc, long brm) {
  RelevanceRow row;
  row.project = project;
  row.br_tc = br_tc;
  row.brm_tc = brm_tc;
  row.brm = brm;
  if (br_tc > 0) {
    row.rir_pct = 100.0 * static_cast<double>(brm_tc) / static_cast<double>(br_tc);
  } else {
    row.degenerate_rir = true;
  }
  if (brm > 0) {
    row.riear_pct = 100.0 * static_cast<double>(brm_tc) / static_cast<double>(brm);
  } else {
    row.degenerate_riear = true;
  }
  return row;
}

RelevanceRow relevance_row(const std::string& project, long br_tc,
                           const std::set<std::string>& brm_values,
                           const std::set<std::string>& tc_values) {
  std::set<std::string> common;
  std::set_intersection(brm_values.begin(), brm_values.end(), tc_values.begin(),
                        tc_values.end(), std::inserter(common, common.begin()));
  return relevance_row_from_counts(project, br_tc, static_cast<long>(common.size()),
                                   static_cast<long>(brm_values.size()));
}

const char* to_string(AggregateMode mode) {
  switch (mode) {
    case AggregateMode::MacroRIR_MicroRIEAR: return "macro-rir/micro-riear";
    case AggregateMode::Macro: return "macro";
    case AggregateMode::Micro: return "micro";
  }
  return "?";
}

RelevanceRow aggregate(const std::vector<RelevanceRow>& rows, AggregateMode mode) {
  if (rows.empty()) throw Error(ErrorKind::Config, "aggregate needs at least one row");

  RelevanceRow total;
  total.project = "Total/Average";
  double rir_sum = 0.0;
  double riear_sum = 0.0;
  for (const auto& row : rows) {
    total.br_tc += row.br_tc;
    total.brm_tc += row.brm_tc;
    total.brm += row.brm;
    rir_sum += row.rir_pct;
    riear_sum += row.riear_pct;
  }
  const double n = static_cast<double>(rows.size());
  const double macro_rir = rir_sum / n;
  const double macro_riear = riear_sum / n;
  const double micro_rir =
      total.br_tc > 0 ? 100.0 * static_cast<double>(total.brm_tc) / total.br_tc : 0.0;
  const double micro_riear =
      total.brm > 0 ? 100.0 * static_cast<double>(total.brm_tc) / total.brm : 0.0;

  switch (mode) {
    case AggregateMode::MacroRIR_MicroRIEAR:
      total.rir_pct = macro_rir;
      total.riear_pct = micro_riear;
      break;
    case AggregateMode::Macro:
      total.rir_pct = macro_rir;
      total.riear_pct = macro_riear;
      break;
    case AggregateMode::Micro:
      total.rir_pct = micro_rir;
      total.riear_pct = micro_riear;
      break;
  }
  total.degenerate_rir = total.br_tc == 0;
  total.degenerate_riear = total.brm == 0;
  return total;
}

namespace {

long sample_size_for(double rate, std::size_t population) {
  return static_cast<long>(std::floor(rate * static_cast<double>(population) + 0.5));
}

}  // namespace

std::map<std::string, std::vector<std::string>> sample(
    const std::map<std::string, std::vector<std::string>>& categories, double rate,
    std::uint64_t seed) {
  if (!(rate > 0.0) || rate > 1.0)
    throw Error(ErrorKind::Config, "sampling rate must be in (0, 1]");

  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [category, population] : categories) {
    const std::size_t n = population.size();
    const std::size_t k =
        std::min(n, static_cast<std::size_t>(sample_size_for(rate, n)));

    // Category-specific stream so the draw does not depend on how many
    // categories precede this one.
    std::mt19937_64 rng(seed ^ fnv1a64(category));
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      // mt19937_64 output is standardized, so avoiding
      // uniform_int_distribution keeps the draw identical across
      // platforms.
      std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
      std::swap(indices[i], indices[j]);
    }
    std::vector<std::size_t> chosen(indices.begin(), indices.begin() + static_cast<long>(k));
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::string>& ids = out[category];
    ids.reserve(k);
    for (std::size_t index : chosen) ids.push_back(population[index]);
  }
  return out;
}

ValidationRow validation_row_from_counts(const std::string& category,
                                         long sample_size, long llm_correct) {
  ValidationRow row;
  row.category = category;
  row.sample_size = sample_size;
  row.llm_correct = llm_correct;
  row.llm_incorrect = sample_size - llm_correct;
  if (sample_size > 0) {
    row.accuracy_pct =
        100.0 * static_cast<double>(llm_correct) / static_cast<double>(sample_size);
    row.discrepancy_pct = 100.0 * static_cast<double>(row.llm_incorrect) /
                          static_cast<double>(sample_size);
  }
  return row;
}

ValidationReport validate(const std::vector<ClassificationRecord>& llm,
                          const std::map<std::string, Category>& human) {
  std::map<Category, std::pair<long, long>> tallies;  // category -> (size, correct)
  long total = 0;
  long correct = 0;
  for (const auto& record : llm) {
    auto it = human.find(record.report_id);
    if (it == human.end())
      throw Error(ErrorKind::MissingLabel,
                  "no human label for report " + record.report_id);
    auto& [size, agree] = tallies[record.category];
    ++size;
    ++total;
    if (it->second == record.category) {
      ++agree;
      ++correct;
    }
  }

  ValidationReport report;
  for (Category c : {Category::NoInputsMentioned, Category::ExplicitInputMention,
                     Category::ImplicitInputDescription}) {
    auto it = tallies.find(c);
    if (it == tallies.end()) continue;
    report.per_category.push_back(
        validation_row_from_counts(to_string(c), it->second.first, it->second.second));
  }
  report.overall = validation_row_from_counts("Total/Average", total, correct);
  return report;
}

std::map<std::string, Category> load_human_labels(const std::string& csv_text) {
  std::map<std::string, Category> labels;
  for_each_line(csv_text, [&](long line_number, std::string_view line) {
    if (line.empty()) return;
    std::size_t comma = line.find(',');
    if (comma == std::string_view::npos)
      throw Error(ErrorKind::Parse, "expected report_id,category", line_number);
    std::string id(line.substr(0, comma));
    std::string category(line.substr(comma + 1));
    if (!category.empty() && category.back() == '\r') category.pop_back();
    if (line_number == 1 && id == "report_id") return;  // header
    try {
      labels[id] = category_from_string(category);
    } catch (const Error&) {
      throw Error(ErrorKind::Parse, "unknown category '" + category + "'", line_number);
    }
  });
  return labels;
}

CategoryCounts count_categories(const std::vector<ClassificationRecord>& records) {
  CategoryCounts counts;
  for (const auto& record : records) {
    switch (record.category) {
      case Category::NoInputsMentioned: ++counts.no_inputs; break;
      case Category::ExplicitInputMention: ++counts.explicit_mention; break;
      case Category::ImplicitInputDescription: ++counts.implicit_description; break;
    }
  }
  return counts;
}

namespace {

DistributionRow distribution_row(const std::string& project,
                                 const CategoryCounts& counts) {
  DistributionRow row;
  row.project = project;
  row.counts = counts;
  const long subset = counts.explicit_mention + counts.implicit_description;
  if (subset > 0) {
    row.explicit_pct = 100.0 * static_cast<double>(counts.explicit_mention) / subset;
    row.implicit_pct = 100.0 * static_cast<double>(counts.implicit_description) / subset;
  } else {
    row.degenerate = true;
  }
  return row;
}

}  // namespace

DistributionReport category_distribution(
    const std::map<std::string, CategoryCounts>& per_project) {
  DistributionReport report;
  CategoryCounts totals;
  double explicit_sum = 0.0;
  double implicit_sum = 0.0;
  long populated_rows = 0;
  for (const auto& [project, counts] : per_project) {
    DistributionRow row = distribution_row(project, counts);
    totals.no_inputs += counts.no_inputs;
    totals.explicit_mention += counts.explicit_mention;
    totals.implicit_description += counts.implicit_description;
    if (!row.degenerate) {
      explicit_sum += row.explicit_pct;
      implicit_sum += row.implicit_pct;
      ++populated_rows;
    }
    report.per_project.push_back(std::move(row));
  }

  report.total.project = "Total/Average";
  report.total.counts = totals;
  if (populated_rows > 0) {
    report.total.explicit_pct = explicit_sum / populated_rows;
    report.total.implicit_pct = implicit_sum / populated_rows;
  } else {
    report.total.degenerate = true;
  }

  const long all = totals.total();
  if (all > 0) {
    report.overall_no_inputs_pct = 100.0 * static_cast<double>(totals.no_inputs) / all;
    report.overall_explicit_pct =
        100.0 * static_cast<double>(totals.explicit_mention) / all;
    report.overall_implicit_pct =
        100.0 * static_cast<double>(totals.implicit_description) / all;
  }
  return report;
}

DistributionRow category_distribution(const std::vector<ClassificationRecord>& records) {
  return distribution_row("all", count_categories(records));
}

nlohmann::json relevance_table_to_json(
    const std::map<std::string, std::vector<RelevanceRow>>& rows_by_config) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [config, rows] : rows_by_config) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : rows) {
      table.push_back({
          {"br_tc", row.br_tc},
          {"brm", row.brm},
          {"brm_tc", row.brm_tc},
          {"project", row.project},
          {"riear_pct", round2(row.riear_pct)},
          {"rir_pct", round2(row.rir_pct)},
      });
    }
    nlohmann::json summary = nlohmann::json::object();
    if (!rows.empty()) {
      for (AggregateMode mode : {AggregateMode::MacroRIR_MicroRIEAR,
                                 AggregateMode::Macro, AggregateMode::Micro}) {
        RelevanceRow total = aggregate(rows, mode);
        summary[to_string(mode)] = {
            {"riear_pct", round2(total.riear_pct)},
            {"rir_pct", round2(total.rir_pct)},
        };
      }
    }
    out[config] = {{"rows", table}, {"summary", summary}};
  }
  return out;
}

std::string relevance_table_to_markdown(
    const std::map<std::string, std::vector<RelevanceRow>>& rows_by_config) {
  std::ostringstream out;
  for (const auto& [config, rows] : rows_by_config) {
    out << "## " << config << "\n\n";
    out << "| Project | BR∩TC | BRM∩TC | BRM | RIR (%) | RIEAR (%) |\n";
    out << "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& row : rows) {
      out << "| " << row.project << " | " << row.br_tc << " | " << row.brm_tc << " | "
          << row.brm << " | " << format_pct(row.rir_pct) << " | "
          << format_pct(row.riear_pct) << " |\n";
    }
    if (!rows.empty()) {
      RelevanceRow total = aggregate(rows, AggregateMode::MacroRIR_MicroRIEAR);
      out << "| **" << total.project << "** | " << total.br_tc << " | " << total.brm_tc
          << " | " << total.brm << " | " << format_pct(total.rir_pct) << " | "
          << format_pct(total.riear_pct) << " |\n";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace brminer
