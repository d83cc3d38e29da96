#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brminer/segment.hpp"

namespace brminer {

enum class ValueKind { String, Integer, Float };
enum class ValueOrigin { Code, Text };

const char* to_string(ValueKind kind);
const char* to_string(ValueOrigin origin);
ValueKind value_kind_from_string(const std::string& text);

/// One literal candidate. `value` holds the decoded form: strings are the
/// unescaped content, integers base-10, floats the shortest decimal that
/// round-trips. `start`/`end` point at the source characters it was
/// decoded from (relative to the report field once attached to one).
struct ExtractedInput {
  std::string value;
  ValueKind kind = ValueKind::String;
  ValueOrigin origin = ValueOrigin::Code;
  std::string report_id;
  FieldRef field;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const ExtractedInput&) const = default;
};

/// Non-fatal lexing hiccups (unterminated literal, overlong value, ...).
struct ExtractDiagnostic {
  std::string reason;
  std::size_t offset = 0;
  FieldRef field;
};

struct LexResult {
  std::vector<ExtractedInput> inputs;
  std::vector<ExtractDiagnostic> diagnostics;
};

/// Literal-level lexer for Java-syntax fragments. Tolerant of
/// non-compilable snippets: a malformed tail never aborts the scan.
/// String runs joined by `+` with only whitespace/comments between them
/// collapse into one literal holding the concatenation.
LexResult lex_code_literals(std::string_view text);

/// Prose rules: quoted substrings ('x', "x", `x`; no embedded newline,
/// at most 512 bytes) and standalone numbers. Dotted multi-part tokens
/// (1.2.3) and digits glued into identifiers are rejected.
LexResult regex_text_literals(std::string_view text);

enum class ExtractMode { JavalangOnly, RegexPlusJavalang };
enum class ProseHandling { Scan, Skip };  // JavalangOnly treatment of prose

const char* to_string(ExtractMode mode);
ExtractMode extract_mode_from_string(const std::string& text);

struct InputSet {
  std::string report_id;
  std::string project;
  ExtractMode mode = ExtractMode::RegexPlusJavalang;
  std::vector<ExtractedInput> inputs;  // every occurrence, document order
  std::vector<std::pair<std::string, ValueKind>> unique_values;  // first-seen order
  std::vector<ExtractDiagnostic> diagnostics;

  bool contains(std::string_view value, ValueKind kind) const;
};

/// Rebuilds unique_values from `inputs`; idempotent.
void dedup_input_set(InputSet& set);

InputSet extract(const SegmentedReport& sr, ExtractMode mode,
                 ProseHandling prose = ProseHandling::Scan);

nlohmann::json input_set_to_json(const InputSet& set);
InputSet input_set_from_json(const nlohmann::json& value);

}  // namespace brminer
