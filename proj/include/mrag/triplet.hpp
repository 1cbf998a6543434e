#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/error.hpp"

namespace mrag {

/// One contrastive training example by reference: a query payload plus its
/// instruction, the positive chunk id and N >= 1 negative chunk ids.
struct ContrastiveTriplet {
  std::optional<std::string> qid;
  Payload query;
  std::string instruction;
  std::string positive_id;
  std::vector<std::string> negative_ids;

  void validate() const {
    require(!query.empty(), Errc::invalid_input, "triplet query is empty");
    require(!positive_id.empty(), Errc::invalid_input, "triplet has no positive");
    require(!negative_ids.empty(), Errc::invalid_input, "triplet needs at least one negative");
    for (std::size_t i = 0; i < negative_ids.size(); ++i) {
      require(negative_ids[i] != positive_id, Errc::invalid_input, "positive listed among negatives");
      for (std::size_t j = 0; j < i; ++j) {
        require(negative_ids[i] != negative_ids[j], Errc::invalid_input, "duplicate negative " + negative_ids[i]);
      }
    }
  }

  friend bool operator==(const ContrastiveTriplet&, const ContrastiveTriplet&) = default;
};

inline Json triplet_to_json(const ContrastiveTriplet& t) {
  Json j;
  if (t.qid) j["qid"] = *t.qid;
  j["query"] = Json{{"elements", payload_to_json(t.query)}};
  j["instruction"] = t.instruction;
  j["positive"] = t.positive_id;
  j["negatives"] = t.negative_ids;
  return j;
}

inline ContrastiveTriplet triplet_from_json(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "record must be an object");
  ContrastiveTriplet t;
  t.qid = json_opt_string(j, "qid");
  t.query = payload_from_json(json_field(json_field(j, "query"), "elements"));
  t.instruction = json_string(j, "instruction");
  t.positive_id = json_string(j, "positive");
  const Json& negs = json_field(j, "negatives");
  if (!negs.is_array()) fail(Errc::parse_error, "\"negatives\" must be an array");
  for (const auto& n : negs) t.negative_ids.push_back(n.get<std::string>());
  t.validate();
  return t;
}

}  // namespace mrag
