#include "brminer/segment.hpp"

#include <regex>

#include <nlohmann/json.hpp>

#include "brminer/error.hpp"

namespace brminer {

const char* to_string(SegmentKind kind) {
  return kind == SegmentKind::Code ? "code" : "prose";
}

std::string to_string(const FieldRef& field) {
  switch (field.kind) {
    case FieldRef::Kind::Title: return "title";
    case FieldRef::Kind::Description: return "description";
    case FieldRef::Kind::Comment:
      return "comment[" + std::to_string(field.comment_index) + "]";
  }
  return "?";
}

namespace {

struct Line {
  std::size_t start;  // includes the trailing newline, if any
  std::size_t end;
  bool code = false;
};

std::vector<Line> split_lines(const std::string& text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = (nl == std::string::npos) ? text.size() : nl + 1;
    lines.push_back({pos, end});
    pos = end;
  }
  return lines;
}

std::string_view line_body(const std::string& text, const Line& line) {
  std::size_t end = line.end;
  if (end > line.start && text[end - 1] == '\n') --end;
  return std::string_view(text).substr(line.start, end - line.start);
}

std::string_view trim_left(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

bool is_backtick_fence(std::string_view body) {
  return trim_left(body).substr(0, 3) == "```";
}

bool is_jira_fence(std::string_view body) {
  auto t = trim_left(body);
  if (t.substr(0, 5) == "{code") {
    auto close = t.find('}');
    return close != std::string_view::npos;
  }
  return t.substr(0, 9) == "{noformat";
}

bool is_patch_line(std::string_view body) {
  if (body.empty()) return false;
  if (body.substr(0, 2) == "@@") return true;
  return body[0] == '+' || body[0] == '-';
}

const std::regex& stack_frame_pattern() {
  static const std::regex re(
      R"(^\s*at\s+[A-Za-z_$][\w$]*(\.[\w$<>]+)*\s*\([^()\n]*\.java:\d+\)\s*$)");
  return re;
}

bool is_stack_line(std::string_view body) {
  auto t = trim_left(body);
  if (t.substr(0, 10) == "Caused by:") return true;
  return std::regex_match(body.begin(), body.end(), stack_frame_pattern());
}

bool is_indented_code_line(std::string_view body) {
  if (body.substr(0, 1) == "\t") return trim_left(body).size() > 0;
  if (body.substr(0, 4) == "    ") return trim_left(body).size() > 0;
  return false;
}

// Fenced blocks claim their lines first; later passes only see what is
// still unclaimed, which gives fences > hunks > traces > indentation.
void mark_fences(const std::string& text, std::vector<Line>& lines) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto body = line_body(text, lines[i]);
    bool backtick = is_backtick_fence(body);
    bool jira = !backtick && is_jira_fence(body);
    if (!backtick && !jira) continue;
    lines[i].code = true;
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      lines[j].code = true;
      auto close = line_body(text, lines[j]);
      if (backtick ? is_backtick_fence(close) : is_jira_fence(close)) break;
    }
    i = j;  // unterminated fence runs to the end of the field
  }
}

template <typename Pred>
void mark_runs(const std::string& text, std::vector<Line>& lines, Pred pred,
               std::size_t min_run) {
  std::size_t i = 0;
  while (i < lines.size()) {
    if (lines[i].code || !pred(line_body(text, lines[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lines.size() && !lines[j].code && pred(line_body(text, lines[j]))) ++j;
    if (j - i >= min_run)
      for (std::size_t k = i; k < j; ++k) lines[k].code = true;
    i = j;
  }
}

bool has_inline_backtick_span(std::string_view text) {
  std::size_t open = std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      open = std::string_view::npos;
    } else if (text[i] == '`') {
      if (open == std::string_view::npos) {
        open = i;
      } else if (i > open + 1) {
        return true;
      } else {
        open = i;  // `` is not a span
      }
    }
  }
  return false;
}

}  // namespace

std::vector<Segment> segment_field(const std::string& text, FieldRef field) {
  std::vector<Segment> segments;
  if (text.empty()) return segments;

  if (field.kind == FieldRef::Kind::Title) {
    Segment s{SegmentKind::Prose, field, 0, text.size(), text,
              has_inline_backtick_span(text)};
    segments.push_back(std::move(s));
    return segments;
  }

  auto lines = split_lines(text);
  mark_fences(text, lines);
  mark_runs(text, lines, is_patch_line, 3);
  mark_runs(text, lines, is_stack_line, 1);
  mark_runs(text, lines, is_indented_code_line, 2);

  std::size_t i = 0;
  while (i < lines.size()) {
    std::size_t j = i;
    while (j < lines.size() && lines[j].code == lines[i].code) ++j;
    Segment s;
    s.kind = lines[i].code ? SegmentKind::Code : SegmentKind::Prose;
    s.field = field;
    s.start = lines[i].start;
    s.end = lines[j - 1].end;
    s.text = text.substr(s.start, s.end - s.start);
    if (s.kind == SegmentKind::Prose) s.inline_code = has_inline_backtick_span(s.text);
    segments.push_back(std::move(s));
    i = j;
  }
  return segments;
}

SegmentedReport segment(const BugReport& report) {
  SegmentedReport sr;
  sr.report_id = report.id;
  sr.project = report.project;
  auto append = [&](const std::string& text, FieldRef field) {
    auto segments = segment_field(text, field);
    sr.segments.insert(sr.segments.end(), segments.begin(), segments.end());
  };
  append(report.title, {FieldRef::Kind::Title, -1});
  append(report.description, {FieldRef::Kind::Description, -1});
  for (std::size_t i = 0; i < report.comments.size(); ++i)
    append(report.comments[i], {FieldRef::Kind::Comment, static_cast<int>(i)});
  return sr;
}

std::vector<Segment> code_segments(const SegmentedReport& sr) {
  std::vector<Segment> out;
  for (const auto& s : sr.segments)
    if (s.kind == SegmentKind::Code) out.push_back(s);
  return out;
}

namespace {

nlohmann::json field_to_json(const FieldRef& field) {
  switch (field.kind) {
    case FieldRef::Kind::Title: return {{"kind", "title"}};
    case FieldRef::Kind::Description: return {{"kind", "description"}};
    case FieldRef::Kind::Comment:
      return {{"kind", "comment"}, {"index", field.comment_index}};
  }
  return {};
}

FieldRef field_from_json(const nlohmann::json& value) {
  const auto kind = value.at("kind").get<std::string>();
  if (kind == "title") return {FieldRef::Kind::Title, -1};
  if (kind == "description") return {FieldRef::Kind::Description, -1};
  if (kind == "comment") return {FieldRef::Kind::Comment, value.at("index").get<int>()};
  throw Error(ErrorKind::Parse, "unknown field kind '" + kind + "'");
}

}  // namespace

nlohmann::json segmented_to_json(const SegmentedReport& sr) {
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : sr.segments) {
    nlohmann::json j{
        {"end", s.end},
        {"field", field_to_json(s.field)},
        {"kind", to_string(s.kind)},
        {"start", s.start},
        {"text", s.text},
    };
    if (s.inline_code) j["inline_code"] = true;
    segments.push_back(std::move(j));
  }
  return {{"project", sr.project}, {"report_id", sr.report_id}, {"segments", segments}};
}

SegmentedReport segmented_from_json(const nlohmann::json& value) {
  SegmentedReport sr;
  sr.project = value.at("project").get<std::string>();
  sr.report_id = value.at("report_id").get<std::string>();
  for (const auto& j : value.at("segments")) {
    Segment s;
    s.kind = j.at("kind").get<std::string>() == "code" ? SegmentKind::Code
                                                       : SegmentKind::Prose;
    s.field = field_from_json(j.at("field"));
    s.start = j.at("start").get<std::size_t>();
    s.end = j.at("end").get<std::size_t>();
    s.text = j.at("text").get<std::string>();
    s.inline_code = j.value("inline_code", false);
    sr.segments.push_back(std::move(s));
  }
  return sr;
}

}  // namespace brminer
