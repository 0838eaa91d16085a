#include "mmgn/smiles.hpp"

#include <algorithm>
#include <set>

namespace mmgn::smiles {

std::vector<std::string> lex(const std::string& s) {
  if (s.empty()) throw ParseError("tokenize: empty SMILES string");
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const char c = s[i];
    if (c == '[') {
      const std::size_t close = s.find(']', i);
      if (close == std::string::npos) {
        throw ParseError("tokenize: unterminated '[' at position " + std::to_string(i));
      }
      out.push_back(s.substr(i, close - i + 1));
      i = close + 1;
    } else if (c == '%') {
      // %nn ring label: needs exactly two digits.
      if (i + 2 < n && std::isdigit(static_cast<unsigned char>(s[i + 1])) &&
          std::isdigit(static_cast<unsigned char>(s[i + 2]))) {
        out.push_back(s.substr(i, 3));
        i += 3;
      } else {
        out.push_back(std::string(1, c));
        ++i;
      }
    } else if ((c == 'C' || c == 'B') && i + 1 < n &&
               ((c == 'C' && s[i + 1] == 'l') || (c == 'B' && s[i + 1] == 'r'))) {
      out.push_back(s.substr(i, 2));
      i += 2;
    } else {
      out.push_back(std::string(1, c));
      ++i;
    }
  }
  return out;
}

Vocabulary::Vocabulary() {
  id_to_token_ = {"{PAD}", "{START}", "{EOS}", "{UNK}"};
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    token_to_id_[id_to_token_[i]] = static_cast<int>(i);
  }
}

Vocabulary Vocabulary::from_corpus(const std::vector<std::string>& corpus) {
  std::set<std::string> seen;
  for (const std::string& line : corpus) {
    for (const std::string& tok : lex(line)) seen.insert(tok);
  }
  Vocabulary v;
  for (const std::string& tok : seen) {
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  if (tokens.size() < 4 || tokens[0] != "{PAD}" || tokens[1] != "{START}" ||
      tokens[2] != "{EOS}" || tokens[3] != "{UNK}") {
    throw VocabError("vocabulary listing must start with {PAD} {START} {EOS} {UNK}");
  }
  for (std::size_t i = 4; i < tokens.size(); ++i) {
    if (v.token_to_id_.count(tokens[i])) {
      throw VocabError("duplicate vocabulary token '" + tokens[i] + "'");
    }
    v.token_to_id_[tokens[i]] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tokens[i]);
  }
  return v;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw VocabError("token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenSequence tokenize(const std::string& s, const Vocabulary& v) {
  TokenSequence t;
  t.ids.push_back(Vocabulary::kStart);
  for (const std::string& tok : lex(s)) t.ids.push_back(v.id(tok));
  t.ids.push_back(Vocabulary::kEos);
  return t;
}

std::string detokenize(const TokenSequence& t, const Vocabulary& v) {
  std::vector<std::size_t> unk_positions;
  std::string out;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const int id = t.ids[i];
    if (id == Vocabulary::kUnk) {
      unk_positions.push_back(i);
      continue;
    }
    if (id == Vocabulary::kPad || id == Vocabulary::kStart || id == Vocabulary::kEos) continue;
    out += v.token(id);
  }
  if (!unk_positions.empty()) {
    std::string msg = "detokenize: UNK at positions";
    for (std::size_t p : unk_positions) msg += " " + std::to_string(p);
    throw VocabError(msg);
  }
  return out;
}

}  // namespace mmgn::smiles
