#include <doctest.h>

#include "mmgn/smiles.hpp"

using namespace mmgn;
using smiles::Vocabulary;

TEST_CASE("lexer longest match") {
  CHECK(smiles::lex("CCl") == std::vector<std::string>{"C", "Cl"});
  CHECK(smiles::lex("CBr") == std::vector<std::string>{"C", "Br"});
  CHECK(smiles::lex("C%12C") == std::vector<std::string>{"C", "%12", "C"});
  CHECK(smiles::lex("[NH3+]C") == std::vector<std::string>{"[NH3+]", "C"});
  CHECK_THROWS_AS(smiles::lex("C[NH"), ParseError);
  CHECK_THROWS_AS(smiles::lex(""), ParseError);
}

TEST_CASE("tokenize wraps with START and EOS") {
  const Vocabulary v = Vocabulary::from_corpus({"CCO", "CCl", "C%12CCCCCCCCCCC%12"});
  const auto t = smiles::tokenize("CCO", v);
  REQUIRE(t.ids.size() == 5);
  CHECK(t.ids.front() == Vocabulary::kStart);
  CHECK(t.ids.back() == Vocabulary::kEos);
  CHECK(t.ids[1] == v.id("C"));
  CHECK(t.ids[3] == v.id("O"));
  CHECK(v.id("Cl") != Vocabulary::kUnk);
  CHECK(v.id("%12") != Vocabulary::kUnk);
}

TEST_CASE("unknown surface tokens become UNK") {
  const Vocabulary v = Vocabulary::from_corpus({"CCO"});
  const auto t = smiles::tokenize("CXO", v);
  CHECK(t.ids[2] == Vocabulary::kUnk);
}

TEST_CASE("detokenize round trip and edge cases") {
  const Vocabulary v = Vocabulary::from_corpus({"CCO", "c1ccccc1", "C(=O)N"});
  SUBCASE("simple round trip") {
    CHECK(smiles::detokenize(smiles::tokenize("CCO", v), v) == "CCO");
  }
  SUBCASE("empty payload") {
    smiles::TokenSequence t;
    t.ids = {Vocabulary::kStart, Vocabulary::kEos};
    CHECK(smiles::detokenize(t, v).empty());
  }
  SUBCASE("UNK raises with positions") {
    smiles::TokenSequence t;
    t.ids = {Vocabulary::kStart, Vocabulary::kUnk, Vocabulary::kEos};
    CHECK_THROWS_WITH_AS(smiles::detokenize(t, v), doctest::Contains("positions 1"),
                         VocabError);
  }
  SUBCASE("pad suffix is dropped") {
    auto t = smiles::tokenize("C(=O)N", v);
    t.ids.push_back(Vocabulary::kPad);
    t.ids.push_back(Vocabulary::kPad);
    CHECK(smiles::detokenize(t, v) == "C(=O)N");
  }
}

TEST_CASE("vocabulary bijectivity over non-UNK ids") {
  const Vocabulary v =
      Vocabulary::from_corpus({"CCO", "c1ccncc1", "C(=O)[O-]", "CCl", "C%11CCCCCCCCCCCC%11"});
  for (int id = 0; id < static_cast<int>(v.size()); ++id) {
    if (id == Vocabulary::kUnk) continue;
    CHECK(v.id(v.token(id)) == id);
  }
  CHECK_THROWS_AS(v.token(static_cast<int>(v.size())), VocabError);
  CHECK_THROWS_AS(v.token(-1), VocabError);
}

TEST_CASE("token sequence length excludes padding") {
  const Vocabulary v = Vocabulary::from_corpus({"CCO"});
  smiles::TokenSequence t = smiles::tokenize("CCO", v);
  const std::size_t base = t.ids.size();
  t.ids.push_back(Vocabulary::kPad);
  t.ids.push_back(Vocabulary::kPad);
  CHECK(t.length(v) == base);
}

TEST_CASE("vocabulary reserved ids are fixed") {
  const Vocabulary v;
  CHECK(Vocabulary::kPad == 0);
  CHECK(Vocabulary::kStart == 1);
  CHECK(Vocabulary::kEos == 2);
  CHECK(Vocabulary::kUnk == 3);
  CHECK(v.size() == 4);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"{PAD}", "{START}"}), VocabError);
}
