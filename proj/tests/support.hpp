#pragma once

// Shared helpers for the test binaries: fixture paths, seeded generators
// and the independent reference decoders the extraction tests compare
// against. Everything here must stay decoupled from the library's own
// scanning logic.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "brminer/extract.hpp"
#include "brminer/util.hpp"

namespace testsupport {

inline std::filesystem::path fixtures_dir() {
  return std::filesystem::path(BRMINER_FIXTURES_DIR);
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("brminer-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Random literal corpus for the lexer fuzz. The generator builds the
// expected value first and then renders it to source text with its own
// escaping tables, so expectations never flow through the lexer.
// ---------------------------------------------------------------------------

struct LiteralSpec {
  brminer::ValueKind kind;
  std::string value;   // canonical expected value
  std::string source;  // how it is spelled in the snippet
};

class LiteralFuzzer {
 public:
  explicit LiteralFuzzer(std::uint64_t seed) : rng_(seed) {}

  std::string random_string_value(std::size_t max_len = 24) {
    static const std::string pool =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 "
        "!#$%&()*,-./:;<=>?@[]^_{|}~";
    std::size_t len = rng_() % (max_len + 1);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
      switch (rng_() % 8) {
        case 0: out.push_back('\n'); break;
        case 1: out.push_back('\t'); break;
        case 2: out.push_back('"'); break;
        case 3: out.push_back('\\'); break;
        default: out.push_back(pool[rng_() % pool.size()]);
      }
    }
    return out;
  }

  // Escapes a value the way a Java author would; occasionally spells a
  // plain character as \uXXXX to exercise unicode decoding.
  std::string encode_string(const std::string& value) {
    std::string out = "\"";
    for (char c : value) {
      switch (c) {
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        default:
          if (rng_() % 16 == 0) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x",
                          static_cast<unsigned>(static_cast<unsigned char>(c)));
            out += buf;
          } else {
            out.push_back(c);
          }
      }
    }
    out += "\"";
    return out;
  }

  LiteralSpec random_string_literal() {
    std::string value = random_string_value();
    return {brminer::ValueKind::String, value, encode_string(value)};
  }

  LiteralSpec random_integer_literal() {
    long long value = static_cast<long long>(rng_() % 2000000000ULL);
    std::string source;
    switch (rng_() % 4) {
      case 0: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "0x%llX", static_cast<unsigned long long>(value));
        source = buf;
        break;
      }
      case 1: {
        // binary rendering
        source = "0b";
        if (value == 0) source += "0";
        std::string bits;
        for (unsigned long long v = static_cast<unsigned long long>(value); v; v >>= 1)
          bits.insert(bits.begin(), static_cast<char>('0' + (v & 1)));
        source += bits.empty() ? "" : bits;
        break;
      }
      case 2: {
        source = std::to_string(value);
        if (source.size() > 3 && rng_() % 2) source.insert(source.size() - 3, "_");
        break;
      }
      default:
        source = std::to_string(value);
        if (rng_() % 2) source += (rng_() % 2) ? "L" : "l";
    }
    return {brminer::ValueKind::Integer, brminer::canonical_integer(value), source};
  }

  LiteralSpec random_float_literal() {
    double mantissa = static_cast<double>(rng_() % 1000000) / 1000.0;
    int exponent = static_cast<int>(rng_() % 13) - 6;
    char buf[64];
    std::string source;
    double value;
    if (rng_() % 2) {
      std::snprintf(buf, sizeof(buf), "%.3fe%d", mantissa, exponent);
      source = buf;
      value = std::strtod(buf, nullptr);
    } else {
      std::snprintf(buf, sizeof(buf), "%.4f", mantissa);
      source = buf;
      value = std::strtod(buf, nullptr);
    }
    if (rng_() % 3 == 0) source += (rng_() % 2) ? "f" : "d";
    return {brminer::ValueKind::Float, brminer::canonical_float(value), source};
  }

  LiteralSpec random_literal() {
    switch (rng_() % 3) {
      case 0: return random_string_literal();
      case 1: return random_integer_literal();
      default: return random_float_literal();
    }
  }

  // Benign Java-ish filler that contains no literals of its own. Every
  // piece ends in a non-identifier character so it cannot glue onto the
  // next literal.
  std::string random_junk() {
    static const std::vector<std::string> junk = {
        " ",          ";\n",      " foo = ",  " , ",
        " ) ; x( ",   "\n// note with no literal\n",
        " /* block */ ",          " ident = ", " call( ",
        " + obj.field , ",        "\nreturn ",
    };
    return junk[rng_() % junk.size()];
  }

  std::pair<std::string, std::vector<LiteralSpec>> random_snippet(std::size_t count) {
    std::string snippet = random_junk();
    std::vector<LiteralSpec> specs;
    for (std::size_t i = 0; i < count; ++i) {
      LiteralSpec spec = random_literal();
      snippet += spec.source;
      snippet += random_junk();
      specs.push_back(std::move(spec));
    }
    return {snippet, specs};
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Independent reference decoder: regex-driven, shares no code with the
// lexer. Handles the grammar subset the fuzzer emits.
// ---------------------------------------------------------------------------

struct NaiveLiteral {
  brminer::ValueKind kind;
  std::string value;
};

inline std::vector<NaiveLiteral> naive_decode(const std::string& text) {
  std::vector<NaiveLiteral> out;
  static const std::regex number_re(
      R"(^(0[xX][0-9a-fA-F_]+|0[bB][01_]+|[0-9][0-9_]*(\.[0-9_]+)?([eE][+-]?[0-9]+)?)([fFdDlL]?))");
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '/' && i + 1 < n && text[i + 1] == '/') {
      auto nl = text.find('\n', i);
      i = nl == std::string::npos ? n : nl + 1;
      continue;
    }
    if (c == '/' && i + 1 < n && text[i + 1] == '*') {
      auto close = text.find("*/", i + 2);
      i = close == std::string::npos ? n : close + 2;
      continue;
    }
    if (c == '"') {
      std::string value;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < n) {
        if (text[j] == '"') {
          closed = true;
          ++j;
          break;
        }
        if (text[j] == '\\' && j + 1 < n) {
          char e = text[j + 1];
          if (e == 'n') value += '\n';
          else if (e == 't') value += '\t';
          else if (e == '"') value += '"';
          else if (e == '\\') value += '\\';
          else if (e == 'u' && j + 5 < n) {
            unsigned code = static_cast<unsigned>(
                std::stoul(text.substr(j + 2, 4), nullptr, 16));
            if (code < 0x80) value += static_cast<char>(code);
            else if (code < 0x800) {
              value += static_cast<char>(0xc0 | (code >> 6));
              value += static_cast<char>(0x80 | (code & 0x3f));
            } else {
              value += static_cast<char>(0xe0 | (code >> 12));
              value += static_cast<char>(0x80 | ((code >> 6) & 0x3f));
              value += static_cast<char>(0x80 | (code & 0x3f));
            }
            j += 6;
            continue;
          } else value += e;
          j += 2;
          continue;
        }
        value += text[j];
        ++j;
      }
      if (closed) out.push_back({brminer::ValueKind::String, value});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                       text[i] == '_' || text[i] == '$'))
        ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::smatch match;
      std::string rest = text.substr(i);
      if (std::regex_search(rest, match, number_re)) {
        std::string body = match[1].str();
        std::string suffix = match[4].str();
        std::string cleaned;
        for (char d : body)
          if (d != '_') cleaned += d;
        bool is_hex = cleaned.size() > 1 && (cleaned[1] == 'x' || cleaned[1] == 'X');
        bool is_bin = cleaned.size() > 1 && (cleaned[1] == 'b' || cleaned[1] == 'B');
        bool is_float = !is_hex && !is_bin &&
                        (body.find('.') != std::string::npos ||
                         body.find('e') != std::string::npos ||
                         body.find('E') != std::string::npos || suffix == "f" ||
                         suffix == "F" || suffix == "d" || suffix == "D");
        if (is_float) {
          double value = std::strtod(cleaned.c_str(), nullptr);
          out.push_back({brminer::ValueKind::Float, brminer::canonical_float(value)});
        } else {
          unsigned long long value;
          if (cleaned.size() > 1 && (cleaned[1] == 'x' || cleaned[1] == 'X'))
            value = std::strtoull(cleaned.c_str() + 2, nullptr, 16);
          else if (cleaned.size() > 1 && (cleaned[1] == 'b' || cleaned[1] == 'B'))
            value = std::strtoull(cleaned.c_str() + 2, nullptr, 2);
          else if (cleaned.size() > 1 && cleaned[0] == '0')
            value = std::strtoull(cleaned.c_str(), nullptr, 8);
          else
            value = std::strtoull(cleaned.c_str(), nullptr, 10);
          out.push_back({brminer::ValueKind::Integer,
                         brminer::canonical_integer(static_cast<long long>(value))});
        }
        i += static_cast<std::size_t>(match[0].length());
        continue;
      }
      ++i;
      continue;
    }
    ++i;
  }
  return out;
}

}  // namespace testsupport
