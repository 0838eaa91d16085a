#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmgn/error.hpp"

namespace mmgn::smiles {

// Surface-level lexer shared by the tokenizer and the parser. Splits a
// SMILES string into tokens: bracket atoms "[...]" and ring labels "%nn"
// stay whole, Cl/Br win over C/B, everything else is a single char.
std::vector<std::string> lex(const std::string& s);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary();

  // Collect every surface token of the corpus (sorted, deduplicated) after
  // the four reserved ids.
  static Vocabulary from_corpus(const std::vector<std::string>& corpus);
  // Rebuild from an explicit token listing (checkpoint load). The listing
  // must start with the four reserved surfaces.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, int> token_to_id_;
};

struct TokenSequence {
  std::vector<int> ids;

  // Length excluding trailing padding.
  std::size_t length(const Vocabulary&) const {
    std::size_t n = ids.size();
    while (n > 0 && ids[n - 1] == Vocabulary::kPad) --n;
    return n;
  }
};

// Greedy longest-match tokenization wrapped in START/EOS. Unknown surface
// tokens map to UNK. Throws ParseError on empty input or unterminated '['.
TokenSequence tokenize(const std::string& s, const Vocabulary& v);

// Concatenate surface forms, dropping START/EOS/PAD. Throws VocabError if
// any UNK is present (message lists the positions).
std::string detokenize(const TokenSequence& t, const Vocabulary& v);

}  // namespace mmgn::smiles
