#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/gateway.hpp"
#include "mrag/rng.hpp"

namespace mrag::demo {

/// One planted fact: document `doc_id` states the code word for item `item`.
struct Fact {
  std::size_t item = 0;
  std::string doc_id;
  std::string code_word;
  std::string name;  // two made-up words naming the item
  bool with_image = false;
  bool long_doc = false;
};

struct Corpus {
  std::vector<MixedModalDoc> docs;
  std::vector<Fact> facts;
};

inline const std::vector<std::string>& syllables() {
  static const std::vector<std::string> s{"vel", "tor", "mun", "rik", "sal", "pom", "gren", "hul", "nix", "qua",
                                          "zem", "lor", "fip", "jas", "wob", "tek", "yon", "kru", "mev", "sorn"};
  return s;
}

inline const std::vector<std::string>& topics() {
  static const std::vector<std::string> t{"harbour", "orchard", "foundry", "archive", "observatory",
                                          "greenhouse", "railway", "bakery"};
  return t;
}

inline const std::vector<std::string>& filler() {
  static const std::vector<std::string> f{
      "The {name} is kept in a long wooden drawer at the {topic}.",
      "Visitors who ask for the {name} sign in at the front desk.",
      "Most requests for the {name} arrive early in the morning.",
      "Staff move the {name} between the north and south wings every season.",
      "A small committee reviewed the {name} before it was filed.",
      "The label on the {name} is copied by hand when it begins to fade.",
      "The shelf holding the {name} carries a brass plate.",
      "The night shift checks the {name} twice before leaving.",
      "Heavy rain last spring nearly reached the {name}.",
      "The {name} is counted once a month and reported to the board.",
      "Nobody may remove the {name} without a signed slip.",
      "The {topic} was rebuilt after a fire, and the {name} survived it.",
  };
  return f;
}

/// Sentences without the item name, used to pad long documents.
inline const std::vector<std::string>& background() {
  static const std::vector<std::string> b{
      "The {topic} keeps its ledgers in long wooden drawers.",
      "Visitors to the {topic} are asked to sign in at the front desk.",
      "Staff rotate between the north and south wings every season.",
      "Old records are copied by hand when the paper begins to fade.",
      "Inventory is counted once a month and reported to the board.",
      "Some entries describe tools, others describe maps or letters.",
      "Labels are printed in two colours to separate new and old stock.",
      "Trainees spend their first week learning the filing scheme.",
  };
  return b;
}

inline std::string fill(std::string s, const std::string& slot, const std::string& value) {
  for (auto pos = s.find(slot); pos != std::string::npos; pos = s.find(slot, pos + value.size())) {
    s.replace(pos, slot.size(), value);
  }
  return s;
}

inline std::string doc_id_for(std::size_t item) {
  std::string n = std::to_string(item);
  return "doc-" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

/// The gold chunk of a fact: the planted sentence opens the document.
inline std::string gold_chunk_for(const Fact& f) { return chunk_id(f.doc_id, 0); }

/// Text that identifies the question inside any prompt built from it.
inline std::string question_key(const Fact& f) {
  return "code word belongs to " + f.name + " (item " + std::to_string(f.item) + (f.with_image ? ")" : ")?");
}

inline std::string question_for(const Fact& f) {
  return "Which " + question_key(f) + (f.with_image ? " shown in <image1>?" : "");
}

/// Builds `n` documents with planted code words. Every fourth document
/// carries images, every eighth is long enough to span several chunks and
/// keeps its planted sentence in the first one.
inline Corpus make_corpus(std::size_t n = 200, std::uint64_t seed = 7) {
  Corpus out;
  Rng rng(seed);
  std::set<std::string> used;
  const auto& syl = syllables();
  for (std::size_t item = 1; item <= n; ++item) {
    Fact f;
    f.item = item;
    f.doc_id = doc_id_for(item);
    f.with_image = item % 4 == 0;
    f.long_doc = item % 8 == 3;
    auto word = [&](std::size_t parts) {
      std::string w;
      do {
        w.clear();
        for (std::size_t i = 0; i < parts; ++i) w += syl[rng.below(syl.size())];
      } while (!used.insert(w).second);
      return w;
    };
    f.code_word = word(3);
    f.name = word(2) + " " + word(2);

    const std::string& topic = topics()[rng.below(topics().size())];
    const std::string num = std::to_string(item);
    std::string lead = "Item " + num + ", the " + f.name + ", is held at the " + topic + ". The code word for item " +
                       num + " is " + f.code_word + ". The " + f.name + " was catalogued by the " + topic + " staff.";
    auto sentences = [&](const std::vector<std::string>& bank, std::size_t count) {
      std::string s;
      for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) s += " ";
        s += fill(fill(bank[rng.below(bank.size())], "{topic}", topic), "{name}", f.name);
      }
      return s;
    };

    MixedModalDoc doc;
    doc.id = f.doc_id;
    doc.source = "synthetic-demo";
    doc.elements.push_back(TextSegment{lead + " " + sentences(filler(), 3)});
    if (f.with_image) {
      doc.elements.push_back(ImageRef{"images/item-" + num + "-photo.png", std::nullopt,
                                      std::string("Photo of item ") + num});
      if (item % 8 == 0) {
        doc.elements.push_back(TextSegment{sentences(filler(), 2)});
        doc.elements.push_back(ImageRef{"images/item-" + num + "-label.png", std::nullopt, std::nullopt});
      }
    }
    if (f.long_doc) {
      doc.elements.push_back(TextSegment{sentences(background(), 22)});
      doc.elements.push_back(TextSegment{sentences(background(), 16)});
    }
    out.docs.push_back(std::move(doc));
    out.facts.push_back(std::move(f));
  }
  return out;
}

inline constexpr const char* kQaMarker = "raise no more than five questions";
inline constexpr const char* kRefineMarker = "Shorten the question";
inline constexpr const char* kOptionsMarker = "Write three wrong";
inline constexpr const char* kContextMarker = "using the documents below";

/// Scripted replies that behave like a careful generator on the demo corpus:
/// they answer only when the planted sentence is in the prompt. A few
/// replies are deliberately bad so every filter has something to drop.
inline ScriptedGenerator make_generator(const Corpus& corpus) {
  ScriptedGenerator g("UNKNOWN");
  const auto& facts = corpus.facts;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const Fact& f = facts[i];
    const std::string num = std::to_string(f.item);
    const std::string planted = "The code word for item " + num + " is " + f.code_word;
    const std::string asked = question_key(f);
    const std::string q = question_for(f);

    std::string qa = "[Q1: " + q + " ,A1: " + f.code_word + " ]";
    if (f.item % 10 == 0) qa += ", [Q2: What is mentioned in this passage? ,A2: a code word ]";
    if (f.item % 20 == 5) qa += ", [Q2: What colour is the border in <image2>? ,A2: blue ]";
    g.add_rule({kQaMarker, planted}, qa);

    g.add_rule({kRefineMarker, asked}, "[Q1: " + q + " ,A1: " + f.code_word + " ]");

    if (f.item % 25 != 0) {
      std::string opts;
      for (std::size_t k = 1; k <= 3; ++k) {
        if (k > 1) opts += ", ";
        opts += "[D" + std::to_string(k) + ": " + facts[(i + 7 * k) % facts.size()].code_word + " ]";
      }
      g.add_rule({kOptionsMarker, asked}, opts);
    }

    g.add_rule({kContextMarker, planted, asked}, f.code_word);
  }
  return g;
}

}  // namespace mrag::demo
