#pragma once

#include <cctype>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pairrank/common.hpp"
#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

/// A prompt template with named placeholders. Recognized placeholders are
/// {context}, {candidate_a}, {candidate_b}, {attribute} and {kind}; anything
/// else inside braces is a template error. Comparative templates must
/// mention {candidate_a} exactly once, strictly before a single
/// {candidate_b}; scoring templates mention only {candidate_a}.
struct PromptTemplate {
  std::string body;
  std::string label_first = "Summary A";   // answer naming the first option
  std::string label_second = "Summary B";  // answer naming the second option
  std::string response_kind = "summary";   // substituted for {kind}
};

namespace detail {

inline std::string capitalize(std::string word) {
  if (!word.empty()) {
    word[0] = static_cast<char>(
        std::toupper(static_cast<unsigned char>(word[0])));
  }
  return word;
}

struct Substitution {
  std::string_view name;
  const std::string* value;
};

inline std::string render_body(const PromptTemplate& tmpl,
                               std::span<const Substitution> subs) {
  std::string out;
  out.reserve(tmpl.body.size());
  const std::string& body = tmpl.body;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t open = body.find('{', pos);
    if (open == std::string::npos) {
      out.append(body, pos, std::string::npos);
      break;
    }
    out.append(body, pos, open - pos);
    const std::size_t close = body.find('}', open + 1);
    if (close == std::string::npos) {
      // A lone brace is treated as literal text.
      out.append(body, open, std::string::npos);
      break;
    }
    const std::string_view name(body.data() + open + 1, close - open - 1);
    bool matched = false;
    for (const auto& sub : subs) {
      if (name == sub.name) {
        out.append(*sub.value);
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw TemplateError("unknown placeholder {" + std::string(name) +
                          "} in prompt template");
    }
    pos = close + 1;
  }
  return out;
}

inline std::size_t count_placeholder(const std::string& body,
                                     std::string_view name) {
  const std::string token = "{" + std::string(name) + "}";
  std::size_t count = 0;
  std::size_t pos = body.find(token);
  while (pos != std::string::npos) {
    ++count;
    pos = body.find(token, pos + token.size());
  }
  return count;
}

}  // namespace detail

/// Renders a comparative prompt for the ordered pair (i, j). Swapping i and
/// j swaps only the candidate positions; the surrounding text is identical.
inline std::string render_prompt(const PromptTemplate& tmpl,
                                 const CandidateSet& set, int i, int j) {
  detail::check_pair_indices(set.size(), i, j);
  const std::size_t a_count =
      detail::count_placeholder(tmpl.body, "candidate_a");
  const std::size_t b_count =
      detail::count_placeholder(tmpl.body, "candidate_b");
  if (a_count != 1 || b_count != 1) {
    throw TemplateError(
        "a comparative template must mention {candidate_a} and "
        "{candidate_b} exactly once each");
  }
  if (tmpl.body.find("{candidate_a}") > tmpl.body.find("{candidate_b}")) {
    throw TemplateError("{candidate_a} must appear before {candidate_b}");
  }
  const std::string& first = set.candidates[static_cast<std::size_t>(i)];
  const std::string& second = set.candidates[static_cast<std::size_t>(j)];
  const detail::Substitution subs[] = {
      {"context", &set.context},       {"candidate_a", &first},
      {"candidate_b", &second},        {"attribute", &set.attribute},
      {"kind", &tmpl.response_kind},
  };
  return detail::render_body(tmpl, subs);
}

/// Renders an absolute-scoring prompt for candidate i.
inline std::string render_scoring_prompt(const PromptTemplate& tmpl,
                                         const CandidateSet& set, int i) {
  if (i < 0 || i >= set.size()) {
    throw ValidationError("candidate index out of range: " +
                          std::to_string(i));
  }
  if (detail::count_placeholder(tmpl.body, "candidate_a") != 1 ||
      detail::count_placeholder(tmpl.body, "candidate_b") != 0) {
    throw TemplateError(
        "a scoring template must mention {candidate_a} exactly once and "
        "never {candidate_b}");
  }
  const std::string& candidate = set.candidates[static_cast<std::size_t>(i)];
  const detail::Substitution subs[] = {
      {"context", &set.context},
      {"candidate_a", &candidate},
      {"attribute", &set.attribute},
      {"kind", &tmpl.response_kind},
  };
  return detail::render_body(tmpl, subs);
}

/// Stable identity of a template, used in cache keys.
inline std::string template_fingerprint(const PromptTemplate& tmpl) {
  std::string blob;
  blob.reserve(tmpl.body.size() + 64);
  blob += tmpl.body;
  blob += '\x1f';
  blob += tmpl.label_first;
  blob += '\x1f';
  blob += tmpl.label_second;
  blob += '\x1f';
  blob += tmpl.response_kind;
  return hex64(fnv1a64(blob));
}

// ---------------------------------------------------------------------------
// Built-in templates. Two comparative and two scoring phrasings; assessing a
// different text kind swaps the word "summary" for e.g. "response"
// throughout, including the answer labels.
// ---------------------------------------------------------------------------

inline PromptTemplate comparative_template_1(
    const std::string& kind = "summary") {
  const std::string title = detail::capitalize(kind);
  PromptTemplate tmpl;
  tmpl.response_kind = kind;
  tmpl.label_first = title + " A";
  tmpl.label_second = title + " B";
  tmpl.body = "{context}\n\n" + title + " A: {candidate_a}\n\n" + title +
              " B: {candidate_b}\n\nWhich " + kind + " is more {attribute}, " +
              title + " A or " + title + " B?\n";
  return tmpl;
}

inline PromptTemplate comparative_template_2(
    const std::string& kind = "summary") {
  const std::string title = detail::capitalize(kind);
  PromptTemplate tmpl;
  tmpl.response_kind = kind;
  tmpl.label_first = title + " A";
  tmpl.label_second = title + " B";
  tmpl.body = "Below is a context followed by two candidate " + kind +
              "s.\n\nContext: {context}\n\n" + title +
              " A: {candidate_a}\n\n" + title +
              " B: {candidate_b}\n\nQuestion: Which " + kind +
              " is the more {attribute} one?\nAnswer:";
  return tmpl;
}

inline PromptTemplate scoring_template_1(const std::string& kind = "summary") {
  const std::string title = detail::capitalize(kind);
  PromptTemplate tmpl;
  tmpl.response_kind = kind;
  tmpl.body = "{context}\n\n" + title + ": {candidate_a}\n\nRate how " +
              "{attribute} the " + kind + " is on a scale from 1 to 10.\n";
  return tmpl;
}

inline PromptTemplate scoring_template_2(const std::string& kind = "summary") {
  const std::string title = detail::capitalize(kind);
  PromptTemplate tmpl;
  tmpl.response_kind = kind;
  tmpl.body = "Below is a context followed by a candidate " + kind +
              ".\n\nContext: {context}\n\n" + title +
              ": {candidate_a}\n\nQuestion: How {attribute} is the " + kind +
              ", on a scale from 1 to 10?\nScore:";
  return tmpl;
}

/// Loads a template body from a plain-text file. Labels and kind keep their
/// defaults unless the caller overrides them afterwards.
inline PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open template file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  PromptTemplate tmpl;
  tmpl.body = buffer.str();
  return tmpl;
}

}  // namespace pairrank
