#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brminer/report.hpp"

namespace brminer {

enum class SegmentKind { Code, Prose };

const char* to_string(SegmentKind kind);

/// Which report field a span points into. comment_index is meaningful
/// only for Comment.
struct FieldRef {
  enum class Kind { Title, Description, Comment };
  Kind kind = Kind::Description;
  int comment_index = -1;

  bool operator==(const FieldRef&) const = default;
  auto operator<=>(const FieldRef&) const = default;
};

std::string to_string(const FieldRef& field);

struct Segment {
  SegmentKind kind = SegmentKind::Prose;
  FieldRef field;
  std::size_t start = 0;  // byte offsets into the source field, end exclusive
  std::size_t end = 0;
  std::string text;
  bool inline_code = false;  // prose that carries `single-backtick` spans

  bool operator==(const Segment&) const = default;
};

struct SegmentedReport {
  std::string report_id;
  std::string project;
  std::vector<Segment> segments;

  bool operator==(const SegmentedReport&) const = default;
};

/// Splits each field into code and prose segments. The segments of one
/// field tile it exactly: concatenating their texts in order reproduces
/// the field byte-for-byte. Code regions are, in priority order, fenced
/// blocks (``` or {code}), diff hunks (>=3 lines starting +/-/@@),
/// stack-trace runs ("at pkg.Cls.m(File.java:12)" / "Caused by:"), and
/// indented blocks (>=2 lines indented by 4 spaces or a tab). Titles are
/// always prose.
SegmentedReport segment(const BugReport& report);

std::vector<Segment> code_segments(const SegmentedReport& sr);

/// Classifies one field's text in isolation (exposed for tests/tools).
std::vector<Segment> segment_field(const std::string& text, FieldRef field);

nlohmann::json segmented_to_json(const SegmentedReport& sr);
SegmentedReport segmented_from_json(const nlohmann::json& value);

}  // namespace brminer
