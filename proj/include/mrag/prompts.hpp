#pragma once

#include <fstream>
#include <iterator>
#include <string>

#include "mrag/error.hpp"
#include "mrag/hash.hpp"

namespace mrag {

// Built-in copies of the templates in prompts/. A unit test keeps the two in sync.

inline constexpr const char* kQaTextPrompt = R"PROMPT(Given a text, please analyze the content of the text and raise no more than five questions along with their corresponding answers.
Requirements:
1. The question must be independent of the context, that is, it cannot rely on background information that is not mentioned.
2. The questions raised can be answered in concise language.

Example:

Text:
They broke the law, but it's not a felony. It's an act of love. It's an act of commitment to your family. I honestly think that that is a different kind of crime that there should be a price paid, but it shouldn't rile people up that people are actually coming to this country to provide for their families.
21 thoughts on “Unethical Quote of the Month: Jeb Bush”

Incorrect question:
What does the speaker think about this crime? (Without specifying who the "speaker" is)

Correct question:
What type of crime does Jeb Bush describe as being committed by people coming to the country to provide for their families?

Answer:
Jeb Bush describes it as an act of love and commitment to family, not a felony.

Output format:
[Q1:... ,A1:... ], [Q2:... ,A2:... ], ...
)PROMPT";

inline constexpr const char* kQaMultimodalPrompt = R"PROMPT(You are given a document containing text and images, please analyze the content and raise no more than five questions along with their corresponding answers.
Requirements:
1. The question must be independent of the context, that is, it cannot rely on background information that is not mentioned.
2. You can ask questions about the images in the document, but you need to clearly indicate them like:“Based on the image, <image2>, ...” or “Considering both images, <image1> and <image3>, ...” etc.
3. The questions raised can be answered in concise language.

Example:

Document:
<|image|>The statement by Jeb Bush has its sunny side, I suppose: with any luck, it should ensure that we don’t have a Bush-Clinton contest in 2016. Maybe that was Jeb’s intent. Otherwise, his comments are irresponsible attacks on the rule of law, common sense, fairness and national sovereignty.

There are means by which we can control our border better than we have. And there should be penalties for breaking the law. But the way I look at this — and I’m going to say this, and it’ll be on tape and so be it. The way I look at this is someone who comes to our country because they couldn’t come legally, they come to our country because their families — the dad who loved their children — was worried that their children didn’t have food on the table. And they wanted to make sure their family was intact, and they crossed the border because they had no other means to work to be able to provide for their family.

Incorrect question:
Considering both the text and <image1>, what might be the context of Jeb Bush's speech? (The question cannot be answered without context)

Correct question:
In the image, <image1>, what might be the context of Jeb Bush's speech?

Incorrect question:
What is the main concern expressed about Jeb Bush's comments? (Without specifying what the "comments" is)

Correct question:
What is the main concern expressed about Jeb Bush's comments “someone who comes to our country because they couldn't come legally, they come to our country because their families”?

Output format:
[Q1:... ,A1:... ], [Q2:... ,A2:... ], ...
)PROMPT";

inline constexpr const char* kRefinePrompt = R"PROMPT(Shorten the question and answer below. Drop filler words and repeated information, but do not change any fact. The question must still make sense on its own. Leave image tags such as <image1> exactly as written.

Question: {question}
Answer: {answer}

Output format:
[Q1:... ,A1:... ]
)PROMPT";

inline constexpr const char* kOptionsPrompt = R"PROMPT(Write three wrong but believable answer options for the multiple-choice question below. Each option must differ from the correct answer and from the other two.

Question: {question}
Correct answer: {answer}

Output format:
[D1:... ], [D2:... ], [D3:... ]
)PROMPT";

inline constexpr const char* kContextPrompt = R"PROMPT(Answer the question using the documents below. Reply with the answer only.

{documents}
Question: {question}
Answer:
)PROMPT";

inline constexpr const char* kDirectPrompt = R"PROMPT(Answer the question. Reply with the answer only.

Question: {question}
Answer:
)PROMPT";

/// Templates used by the generation stages. Slots: {question}, {answer},
/// {documents}.
struct PromptSet {
  std::string qa_text = kQaTextPrompt;
  std::string qa_multimodal = kQaMultimodalPrompt;
  std::string refine = kRefinePrompt;
  std::string options = kOptionsPrompt;
  std::string context = kContextPrompt;
  std::string direct = kDirectPrompt;

  /// Loads `<dir>/<name>.txt` for every template.
  static PromptSet load(const std::string& dir) {
    PromptSet p;
    auto read = [&](const char* name) {
      const std::string path = dir + "/" + name + ".txt";
      std::ifstream in(path, std::ios::binary);
      if (!in) fail(Errc::io_error, "cannot read prompt template " + path);
      return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    p.qa_text = read("qa_text");
    p.qa_multimodal = read("qa_multimodal");
    p.refine = read("refine");
    p.options = read("options");
    p.context = read("context");
    p.direct = read("direct");
    return p;
  }

  /// Visits (name, text) for every template.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("qa_text", qa_text);
    fn("qa_multimodal", qa_multimodal);
    fn("refine", refine);
    fn("options", options);
    fn("context", context);
    fn("direct", direct);
  }
};

/// Replaces every "{name}" with value.
inline std::string fill_slot(std::string text, const std::string& name, const std::string& value) {
  const std::string slot = "{" + name + "}";
  for (std::size_t pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + value.size())) {
    text.replace(pos, slot.size(), value);
  }
  return text;
}

}  // namespace mrag
