#include "brminer/extract.hpp"

#include <cctype>
#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"
#include "brminer/util.hpp"

namespace brminer {

namespace {

constexpr std::size_t kMaxLiteralBytes = 4096;  // downstream prompt budget guard
constexpr std::size_t kMaxProseQuoteBytes = 512;

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex_digit(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}
bool is_octal_digit(char c) { return c >= '0' && c <= '7'; }
bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }
bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) || c == '_';
}

void utf8_append(std::string& out, unsigned long cp) {
  if (cp <= 0x7f) {
    out.push_back(static_cast<char>(cp));
  } else if (cp <= 0x7ff) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp <= 0xffff) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

bool read_u16_escape(std::string_view text, std::size_t pos, unsigned long& unit,
                     std::size_t& next) {
  // pos points at 'u' of a \uXXXX sequence.
  if (pos + 4 >= text.size()) return false;
  unsigned long value = 0;
  for (std::size_t k = pos + 1; k <= pos + 4; ++k) {
    char c = text[k];
    if (!is_hex_digit(c)) return false;
    value = value * 16 + static_cast<unsigned long>(
        is_digit(c) ? c - '0' : (std::tolower(static_cast<unsigned char>(c)) - 'a' + 10));
  }
  unit = value;
  next = pos + 5;
  return true;
}

// Decodes one escape sequence; `pos` points at the char after the
// backslash. Surrogate pairs written as \uD8xx\uDCxx are combined.
void decode_escape(std::string_view text, std::size_t& pos, std::string& out) {
  if (pos >= text.size()) return;
  char c = text[pos];
  switch (c) {
    case 'b': out.push_back('\b'); ++pos; return;
    case 't': out.push_back('\t'); ++pos; return;
    case 'n': out.push_back('\n'); ++pos; return;
    case 'f': out.push_back('\f'); ++pos; return;
    case 'r': out.push_back('\r'); ++pos; return;
    case '"': out.push_back('"'); ++pos; return;
    case '\'': out.push_back('\''); ++pos; return;
    case '\\': out.push_back('\\'); ++pos; return;
    case 'u': {
      unsigned long unit = 0;
      std::size_t next = 0;
      if (!read_u16_escape(text, pos, unit, next)) {
        out.push_back('u');
        ++pos;
        return;
      }
      if (unit >= 0xd800 && unit <= 0xdbff && next + 1 < text.size() &&
          text[next] == '\\' && text[next + 1] == 'u') {
        unsigned long low = 0;
        std::size_t after_low = 0;
        if (read_u16_escape(text, next + 1, low, after_low) && low >= 0xdc00 &&
            low <= 0xdfff) {
          unsigned long cp = 0x10000 + ((unit - 0xd800) << 10) + (low - 0xdc00);
          utf8_append(out, cp);
          pos = after_low;
          return;
        }
      }
      utf8_append(out, unit);
      pos = next;
      return;
    }
    default:
      if (is_octal_digit(c)) {
        unsigned long value = static_cast<unsigned long>(c - '0');
        std::size_t len = 1;
        std::size_t max_len = (c <= '3') ? 3 : 2;
        while (len < max_len && pos + len < text.size() &&
               is_octal_digit(text[pos + len])) {
          value = value * 8 + static_cast<unsigned long>(text[pos + len] - '0');
          ++len;
        }
        utf8_append(out, value);
        pos += len;
        return;
      }
      out.push_back(c);  // tolerate unknown escapes
      ++pos;
  }
}

struct QuoteScan {
  bool ok = false;
  std::string value;
  std::size_t end = 0;     // one past the closing quote
  std::size_t resume = 0;  // where to continue on failure
};

// Java string literal starting at text[start] == '"'. Fails (ok=false)
// when the line or input ends before the closing quote.
QuoteScan scan_java_string(std::string_view text, std::size_t start) {
  QuoteScan scan;
  std::size_t i = start + 1;
  while (i < text.size()) {
    char c = text[i];
    if (c == '"') {
      scan.ok = true;
      scan.end = i + 1;
      return scan;
    }
    if (c == '\n') break;
    if (c == '\\') {
      ++i;
      decode_escape(text, i, scan.value);
    } else {
      scan.value.push_back(c);
      ++i;
    }
  }
  scan.resume = i;
  return scan;
}

std::size_t skip_ws_and_comments(std::string_view text, std::size_t i) {
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      ++i;
    } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      i = text.find('\n', i);
      if (i == std::string_view::npos) return text.size();
    } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
      std::size_t close = text.find("*/", i + 2);
      if (close == std::string_view::npos) return text.size();
      i = close + 2;
    } else {
      break;
    }
  }
  return i;
}

struct NumberScan {
  bool ok = false;
  bool is_float = false;
  std::string value;  // canonical rendering
  std::size_t end = 0;
  std::string reason;  // set when !ok and worth a diagnostic
};

std::string strip_separators(std::string_view digits) {
  std::string out;
  for (char c : digits)
    if (c != '_') out.push_back(c);
  return out;
}

bool decode_base_integer(std::string_view digits, int base, unsigned long long& out) {
  unsigned long long value = 0;
  for (char c : digits) {
    unsigned digit;
    if (is_digit(c)) digit = static_cast<unsigned>(c - '0');
    else digit = static_cast<unsigned>(std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
    if (value > (~0ULL - digit) / static_cast<unsigned>(base)) return false;
    value = value * static_cast<unsigned>(base) + digit;
  }
  out = value;
  return true;
}

// Decimal integers that overflow 64 bits keep their digit text, which
// still reads back as an integer.
std::string normalize_decimal_integer(std::string_view digits, bool negative) {
  std::size_t first = 0;
  while (first + 1 < digits.size() && digits[first] == '0') ++first;
  std::string body(digits.substr(first));
  if (negative && body != "0") return "-" + body;
  return body;
}

// Java numeric literal starting at a digit or a '.' followed by a digit.
NumberScan scan_java_number(std::string_view text, std::size_t start) {
  NumberScan scan;
  std::size_t i = start;
  const std::size_t n = text.size();

  auto take_digits = [&](auto pred) {
    std::string run;
    while (i < n && (pred(text[i]) || text[i] == '_')) {
      run.push_back(text[i]);
      ++i;
    }
    return strip_separators(run);
  };

  if (text[i] == '0' && i + 1 < n && (text[i + 1] == 'x' || text[i + 1] == 'X')) {
    i += 2;
    std::string digits = take_digits(is_hex_digit);
    if (i < n && (text[i] == 'l' || text[i] == 'L')) ++i;
    unsigned long long value = 0;
    if (digits.empty() || !decode_base_integer(digits, 16, value)) {
      scan.end = i;
      scan.reason = digits.empty() ? "empty hex literal" : "hex literal overflow";
      return scan;
    }
    scan.ok = true;
    scan.value = canonical_integer(static_cast<long long>(value));
    scan.end = i;
    return scan;
  }

  if (text[i] == '0' && i + 1 < n && (text[i + 1] == 'b' || text[i + 1] == 'B')) {
    i += 2;
    std::string digits = take_digits([](char c) { return c == '0' || c == '1'; });
    if (i < n && (text[i] == 'l' || text[i] == 'L')) ++i;
    unsigned long long value = 0;
    if (digits.empty() || !decode_base_integer(digits, 2, value)) {
      scan.end = i;
      scan.reason = digits.empty() ? "empty binary literal" : "binary literal overflow";
      return scan;
    }
    scan.ok = true;
    scan.value = canonical_integer(static_cast<long long>(value));
    scan.end = i;
    return scan;
  }

  std::string int_part;
  std::string frac_part;
  std::string exp_part;
  bool saw_dot = false;
  bool saw_exp = false;

  if (text[i] != '.') int_part = take_digits(is_digit);
  if (i < n && text[i] == '.') {
    // "1.", "1.5" and ".5" are numbers; "1.equals(...)" keeps the dot as
    // member access and "." alone is not a number.
    bool next_digit = i + 1 < n && is_digit(text[i + 1]);
    bool member_access = i + 1 < n && is_ident_start(text[i + 1]);
    if (next_digit || (!int_part.empty() && !member_access)) {
      saw_dot = true;
      ++i;
      frac_part = take_digits(is_digit);
    }
  }
  if (i < n && (text[i] == 'e' || text[i] == 'E')) {
    std::size_t j = i + 1;
    std::string sign;
    if (j < n && (text[j] == '+' || text[j] == '-')) {
      sign.push_back(text[j]);
      ++j;
    }
    if (j < n && is_digit(text[j])) {
      saw_exp = true;
      i = j;
      exp_part = sign + take_digits(is_digit);
    }
  }

  bool float_suffix = false;
  if (i < n && (text[i] == 'f' || text[i] == 'F' || text[i] == 'd' || text[i] == 'D')) {
    float_suffix = true;
    ++i;
  } else if (i < n && (text[i] == 'l' || text[i] == 'L') && !saw_dot && !saw_exp) {
    ++i;
  }

  scan.end = i;
  if (saw_dot || saw_exp || float_suffix) {
    std::string body = int_part + (saw_dot ? "." + frac_part : "") +
                       (saw_exp ? "e" + exp_part : "");
    if (body.empty() || body == ".") {
      scan.reason = "malformed float literal";
      return scan;
    }
    double value = std::strtod(body.c_str(), nullptr);
    if (!std::isfinite(value)) {
      scan.reason = "non-finite float literal";
      return scan;
    }
    scan.ok = true;
    scan.is_float = true;
    scan.value = canonical_float(value);
    return scan;
  }

  if (int_part.empty()) {
    scan.reason = "malformed numeric literal";
    return scan;
  }
  if (int_part.size() > 1 && int_part[0] == '0') {
    bool all_octal = true;
    for (char c : int_part)
      if (!is_octal_digit(c)) all_octal = false;
    if (all_octal) {
      unsigned long long value = 0;
      if (!decode_base_integer(int_part.substr(1), 8, value)) {
        scan.reason = "octal literal overflow";
        return scan;
      }
      scan.ok = true;
      scan.value = canonical_integer(static_cast<long long>(value));
      return scan;
    }
  }
  scan.ok = true;
  scan.value = normalize_decimal_integer(int_part, false);
  return scan;
}

void emit_string(LexResult& result, std::string value, std::size_t start,
                 std::size_t end, ValueOrigin origin) {
  if (value.size() > kMaxLiteralBytes) {
    value.resize(kMaxLiteralBytes);
    result.diagnostics.push_back({"string literal truncated to 4096 bytes", start, {}});
  }
  ExtractedInput input;
  input.value = std::move(value);
  input.kind = ValueKind::String;
  input.origin = origin;
  input.start = start;
  input.end = end;
  result.inputs.push_back(std::move(input));
}

}  // namespace

const char* to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::String: return "String";
    case ValueKind::Integer: return "Integer";
    case ValueKind::Float: return "Float";
  }
  return "String";
}

const char* to_string(ValueOrigin origin) {
  return origin == ValueOrigin::Code ? "code" : "text";
}

ValueKind value_kind_from_string(const std::string& text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "string") return ValueKind::String;
  if (lower == "integer" || lower == "int") return ValueKind::Integer;
  if (lower == "float" || lower == "double") return ValueKind::Float;
  throw Error(ErrorKind::BadSchema, "unknown value kind '" + text + "'");
}

const char* to_string(ExtractMode mode) {
  return mode == ExtractMode::JavalangOnly ? "javalang" : "regex+javalang";
}

ExtractMode extract_mode_from_string(const std::string& text) {
  if (text == "javalang") return ExtractMode::JavalangOnly;
  if (text == "regex+javalang") return ExtractMode::RegexPlusJavalang;
  throw Error(ErrorKind::Config, "unknown extraction mode '" + text + "'");
}

LexResult lex_code_literals(std::string_view text) {
  LexResult result;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    char c = text[i];
    if (c == '/' && i + 1 < n && (text[i + 1] == '/' || text[i + 1] == '*')) {
      i = skip_ws_and_comments(text, i);
      continue;
    }
    if (c == '"') {
      QuoteScan first = scan_java_string(text, i);
      if (!first.ok) {
        result.diagnostics.push_back({"unterminated string literal", i, {}});
        i = first.resume;
        continue;
      }
      // Fold `"a" + "b"` runs (whitespace/comments only in between) into
      // one literal holding the full concatenation.
      std::string value = std::move(first.value);
      std::size_t close = first.end;
      while (true) {
        std::size_t probe = skip_ws_and_comments(text, close);
        if (probe >= n || text[probe] != '+') break;
        probe = skip_ws_and_comments(text, probe + 1);
        if (probe >= n || text[probe] != '"') break;
        QuoteScan next = scan_java_string(text, probe);
        if (!next.ok) {
          result.diagnostics.push_back({"unterminated string literal", probe, {}});
          break;
        }
        value += next.value;
        close = next.end;
      }
      emit_string(result, std::move(value), i, close, ValueOrigin::Code);
      i = close;
      continue;
    }
    if (c == '\'') {
      std::size_t j = i + 1;
      std::string value;
      if (j < n && text[j] == '\\') {
        ++j;
        decode_escape(text, j, value);
      } else if (j < n && text[j] != '\'' && text[j] != '\n') {
        value.push_back(text[j]);
        ++j;
      }
      if (j < n && text[j] == '\'' && !value.empty()) {
        emit_string(result, std::move(value), i, j + 1, ValueOrigin::Code);
        i = j + 1;
      } else {
        result.diagnostics.push_back({"malformed char literal", i, {}});
        std::size_t line_end = text.find('\n', i + 1);
        std::size_t close = text.find('\'', i + 1);
        i = (close != std::string_view::npos &&
             (line_end == std::string_view::npos || close < line_end))
            ? close + 1
            : i + 1;
      }
      continue;
    }
    if (is_ident_start(c)) {
      while (i < n && is_ident_char(text[i])) ++i;
      continue;
    }
    if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(text[i + 1]))) {
      NumberScan scan = scan_java_number(text, i);
      if (scan.ok) {
        ExtractedInput input;
        input.value = scan.value;
        input.kind = scan.is_float ? ValueKind::Float : ValueKind::Integer;
        input.origin = ValueOrigin::Code;
        input.start = i;
        input.end = scan.end;
        result.inputs.push_back(std::move(input));
      } else if (!scan.reason.empty()) {
        result.diagnostics.push_back({scan.reason, i, {}});
      }
      i = scan.end > i ? scan.end : i + 1;
      continue;
    }
    ++i;
  }
  return result;
}

LexResult regex_text_literals(std::string_view text) {
  LexResult result;
  const std::size_t n = text.size();
  std::size_t i = 0;

  auto skip_glued_run = [&](std::size_t from) {
    std::size_t j = from;
    while (j < n && (is_word_char(text[j]) || text[j] == '.')) ++j;
    return j;
  };

  while (i < n) {
    char c = text[i];
    if (c == '"' || c == '\'' || c == '`') {
      std::size_t close = std::string_view::npos;
      for (std::size_t j = i + 1; j < n && j - i - 1 <= kMaxProseQuoteBytes; ++j) {
        if (text[j] == '\n') break;
        if (text[j] == c) {
          close = j;
          break;
        }
      }
      if (close != std::string_view::npos) {
        emit_string(result, std::string(text.substr(i + 1, close - i - 1)), i,
                    close + 1, ValueOrigin::Text);
        i = close + 1;
      } else {
        ++i;
      }
      continue;
    }

    bool negative = c == '-' && i + 1 < n && is_digit(text[i + 1]) &&
                    (i == 0 || std::isspace(static_cast<unsigned char>(text[i - 1])));
    if (is_digit(c) || negative) {
      std::size_t digits_at = negative ? i + 1 : i;
      if (digits_at > 0) {
        char prev = text[digits_at - 1];
        bool prev_blocks = negative ? false : (is_word_char(prev) || prev == '.');
        if (prev_blocks) {
          i = skip_glued_run(digits_at);
          continue;
        }
      }
      std::size_t j = digits_at;
      bool saw_dot = false;
      bool saw_exp = false;
      while (j < n && is_digit(text[j])) ++j;
      if (j + 1 < n && text[j] == '.' && is_digit(text[j + 1])) {
        saw_dot = true;
        ++j;
        while (j < n && is_digit(text[j])) ++j;
      }
      if (j < n && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < n && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < n && is_digit(text[k])) {
          saw_exp = true;
          j = k;
          while (j < n && is_digit(text[j])) ++j;
        }
      }
      bool glued_ident = j < n && (is_word_char(text[j]));
      bool dotted = j + 1 < n && text[j] == '.' && is_digit(text[j + 1]);
      if (glued_ident || dotted) {
        i = skip_glued_run(digits_at);
        continue;
      }
      std::string body(text.substr(digits_at, j - digits_at));
      ExtractedInput input;
      input.origin = ValueOrigin::Text;
      input.start = i;
      input.end = j;
      if (saw_dot || saw_exp) {
        double value = std::strtod((negative ? "-" + body : body).c_str(), nullptr);
        if (!std::isfinite(value)) {
          result.diagnostics.push_back({"non-finite number in text", i, {}});
          i = j;
          continue;
        }
        input.kind = ValueKind::Float;
        input.value = canonical_float(value);
      } else {
        input.kind = ValueKind::Integer;
        input.value = normalize_decimal_integer(body, negative);
      }
      result.inputs.push_back(std::move(input));
      i = j;
      continue;
    }
    ++i;
  }
  return result;
}

bool InputSet::contains(std::string_view value, ValueKind kind) const {
  for (const auto& [v, k] : unique_values)
    if (k == kind && v == value) return true;
  return false;
}

void dedup_input_set(InputSet& set) {
  set.unique_values.clear();
  std::set<std::pair<std::string, int>> seen;
  for (const auto& input : set.inputs)
    if (seen.insert({input.value, static_cast<int>(input.kind)}).second)
      set.unique_values.emplace_back(input.value, input.kind);
}

InputSet extract(const SegmentedReport& sr, ExtractMode mode, ProseHandling prose) {
  InputSet set;
  set.report_id = sr.report_id;
  set.project = sr.project;
  set.mode = mode;
  for (const auto& seg : sr.segments) {
    LexResult lexed;
    if (mode == ExtractMode::JavalangOnly) {
      if (seg.kind == SegmentKind::Prose && prose == ProseHandling::Skip) continue;
      lexed = lex_code_literals(seg.text);
    } else {
      lexed = seg.kind == SegmentKind::Code ? lex_code_literals(seg.text)
                                            : regex_text_literals(seg.text);
    }
    for (auto& input : lexed.inputs) {
      input.report_id = sr.report_id;
      input.field = seg.field;
      input.origin = seg.kind == SegmentKind::Code ? ValueOrigin::Code : ValueOrigin::Text;
      input.start += seg.start;
      input.end += seg.start;
      set.inputs.push_back(std::move(input));
    }
    for (auto& diag : lexed.diagnostics) {
      diag.field = seg.field;
      diag.offset += seg.start;
      set.diagnostics.push_back(std::move(diag));
    }
  }
  dedup_input_set(set);
  return set;
}

namespace {

nlohmann::json field_json(const FieldRef& field) {
  switch (field.kind) {
    case FieldRef::Kind::Title: return {{"kind", "title"}};
    case FieldRef::Kind::Description: return {{"kind", "description"}};
    case FieldRef::Kind::Comment:
      return {{"kind", "comment"}, {"index", field.comment_index}};
  }
  return {};
}

FieldRef field_from(const nlohmann::json& value) {
  const auto kind = value.at("kind").get<std::string>();
  if (kind == "title") return {FieldRef::Kind::Title, -1};
  if (kind == "description") return {FieldRef::Kind::Description, -1};
  return {FieldRef::Kind::Comment, value.at("index").get<int>()};
}

}  // namespace

nlohmann::json input_set_to_json(const InputSet& set) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& input : set.inputs) {
    inputs.push_back({
        {"end", input.end},
        {"field", field_json(input.field)},
        {"kind", to_string(input.kind)},
        {"origin", to_string(input.origin)},
        {"start", input.start},
        {"value", input.value},
    });
  }
  return {
      {"inputs", inputs},
      {"mode", to_string(set.mode)},
      {"project", set.project},
      {"report_id", set.report_id},
  };
}

InputSet input_set_from_json(const nlohmann::json& value) {
  InputSet set;
  set.report_id = value.at("report_id").get<std::string>();
  set.project = value.at("project").get<std::string>();
  set.mode = extract_mode_from_string(value.at("mode").get<std::string>());
  for (const auto& j : value.at("inputs")) {
    ExtractedInput input;
    input.value = j.at("value").get<std::string>();
    input.kind = value_kind_from_string(j.at("kind").get<std::string>());
    input.origin = j.at("origin").get<std::string>() == "code" ? ValueOrigin::Code
                                                               : ValueOrigin::Text;
    input.report_id = set.report_id;
    input.field = field_from(j.at("field"));
    input.start = j.at("start").get<std::size_t>();
    input.end = j.at("end").get<std::size_t>();
    set.inputs.push_back(std::move(input));
  }
  dedup_input_set(set);
  return set;
}

}  // namespace brminer
