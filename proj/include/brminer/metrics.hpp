#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brminer/llm.hpp"
#include "brminer/report.hpp"

namespace brminer {

/// Normalized tokens of one project: bug-report tokens or test-case
/// literal values. Normalization (quote stripping, canonical numeric
/// rendering) happens exactly once, on the way in.
struct TokenSet {
  std::string project;
  std::set<std::string> tokens;
};

/// Adds one report's tokens: quoted substrings (quotes stripped), numeric
/// tokens (canonicalized) and identifier/word runs split on everything
/// except [A-Za-z0-9_]. Case-sensitive.
void tokenize_report_into(const BugReport& report, std::set<std::string>& out);

TokenSet tokenize_reports(const std::string& project,
                          const std::vector<BugReport>& reports);

/// Unique literal values found by the code lexer across a project's test
/// sources.
TokenSet testcase_literals(const std::string& project,
                           const std::vector<std::string>& test_sources);

/// Exact-match intersection; throws Error(KeyMismatch) when the sets
/// belong to different projects.
std::set<std::string> intersect(const TokenSet& a, const TokenSet& b);

/// Matching is case-sensitive by default; callers that opt into folded
/// matching lower-case both sides with this before intersecting.
TokenSet fold_case(TokenSet set);

struct RelevanceRow {
  std::string project;
  long br_tc = 0;   // |BR tokens ∩ TC literals|
  long brm_tc = 0;  // |miner values ∩ TC literals|
  long brm = 0;     // unique miner values
  double rir_pct = 0.0;
  double riear_pct = 0.0;
  bool degenerate_rir = false;    // zero denominator, reported as 0
  bool degenerate_riear = false;
};

RelevanceRow relevance_row(const std::string& project, long br_tc,
                           const std::set<std::string>& brm_values,
                           const std::set<std::string>& tc_values);

/// Table reproduction path: the percentages from published counts.
RelevanceRow relevance_row_from_counts(const std::string& project, long br_tc,
                                       long brm_tc, long brm);

enum class AggregateMode { MacroRIR_MicroRIEAR, Macro, Micro };

const char* to_string(AggregateMode mode);

/// Macro: unweighted mean of the per-row percentages. Micro: percentages
/// of the summed numerators and denominators. The mixed default matches
/// the convention of reporting a macro RIR next to a micro RIEAR on the
/// summary line.
RelevanceRow aggregate(const std::vector<RelevanceRow>& rows, AggregateMode mode);

/// Proportional sampling: per category, round-half-up(rate * N) ids drawn
/// uniformly without replacement. Deterministic for a given seed
/// regardless of map iteration order.
std::map<std::string, std::vector<std::string>> sample(
    const std::map<std::string, std::vector<std::string>>& categories, double rate,
    std::uint64_t seed);

struct ValidationRow {
  std::string category;
  long sample_size = 0;
  long llm_correct = 0;
  long llm_incorrect = 0;
  double accuracy_pct = 0.0;
  double discrepancy_pct = 0.0;
};

struct ValidationReport {
  std::vector<ValidationRow> per_category;
  ValidationRow overall;
};

ValidationRow validation_row_from_counts(const std::string& category,
                                         long sample_size, long llm_correct);

/// Compares LLM classifications against human labels keyed by report id;
/// rows are grouped by the LLM-assigned category. Throws
/// Error(MissingLabel) when a sampled report has no human label.
ValidationReport validate(const std::vector<ClassificationRecord>& llm,
                          const std::map<std::string, Category>& human);

/// Parses a `report_id,category` CSV (header optional).
std::map<std::string, Category> load_human_labels(const std::string& csv_text);

struct CategoryCounts {
  long no_inputs = 0;
  long explicit_mention = 0;
  long implicit_description = 0;

  long total() const { return no_inputs + explicit_mention + implicit_description; }
};

CategoryCounts count_categories(const std::vector<ClassificationRecord>& records);

struct DistributionRow {
  std::string project;
  CategoryCounts counts;
  double explicit_pct = 0.0;  // share of the explicit+implicit subset
  double implicit_pct = 0.0;
  bool degenerate = false;  // empty subset, percentages reported as 0
};

struct DistributionReport {
  std::vector<DistributionRow> per_project;
  DistributionRow total;  // counts summed; percentages are the unweighted
                          // mean of the per-project rows
  double overall_no_inputs_pct = 0.0;  // over all reports, all categories
  double overall_explicit_pct = 0.0;
  double overall_implicit_pct = 0.0;
};

DistributionReport category_distribution(
    const std::map<std::string, CategoryCounts>& per_project);

/// Single-population convenience: fractions over all records plus the
/// explicit/implicit subset split.
DistributionRow category_distribution(const std::vector<ClassificationRecord>& records);

nlohmann::json relevance_table_to_json(
    const std::map<std::string, std::vector<RelevanceRow>>& rows_by_config);
std::string relevance_table_to_markdown(
    const std::map<std::string, std::vector<RelevanceRow>>& rows_by_config);

}  // namespace brminer
