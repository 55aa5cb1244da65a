#pragma once

#include <fstream>
#include <istream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

/// Reads candidate sets from JSONL: one object per line with fields
/// instance_id, context, candidates[], optional gold_scores[] and optional
/// attribute. Errors carry the offending line number. `default_attribute`
/// fills instances whose line does not set one.
inline std::vector<CandidateSet> ingest(std::istream& in,
                                        const std::string& source,
                                        const std::string& default_attribute =
                                            "") {
  std::vector<CandidateSet> sets;
  std::set<std::string> seen_ids;
  std::string text;
  std::size_t line_number = 0;
  const auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source + " line " + std::to_string(line_number) + ": " +
                      what);
  };
  while (std::getline(in, text)) {
    ++line_number;
    if (text.empty()) continue;
    const nlohmann::json line =
        nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (line.is_discarded()) throw fail("invalid JSON");
    if (!line.is_object()) throw fail("expected a JSON object");

    CandidateSet set;
    try {
      set.instance_id = line.at("instance_id").get<std::string>();
      set.context = line.at("context").get<std::string>();
      set.candidates = line.at("candidates").get<std::vector<std::string>>();
      if (line.contains("gold_scores") && !line.at("gold_scores").is_null()) {
        set.gold_scores = line.at("gold_scores").get<std::vector<double>>();
      }
      set.attribute = line.value("attribute", default_attribute);
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
    if (set.instance_id.empty()) throw fail("instance_id must be non-empty");
    if (!seen_ids.insert(set.instance_id).second) {
      throw fail("duplicate instance_id '" + set.instance_id + "'");
    }
    try {
      set.validate();
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

inline std::vector<CandidateSet> ingest(const std::string& path,
                                        const std::string& default_attribute =
                                            "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open dataset '" + path + "'");
  }
  return ingest(in, path, default_attribute);
}

}  // namespace pairrank
