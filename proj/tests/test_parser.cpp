#include <doctest.h>

#include <string>

#include "mmgn/parser.hpp"
#include "mmgn/rng.hpp"

using namespace mmgn;
using smiles::parse;
using smiles::validate;

TEST_CASE("ethanol parse and implicit hydrogens") {
  const auto g = parse("CCO");
  REQUIRE(g.atoms.size() == 3);
  REQUIRE(g.bonds.size() == 2);
  CHECK(g.atoms[0].element == "C");
  CHECK(g.atoms[2].element == "O");
  CHECK(g.atoms[0].implicit_h == 3);
  CHECK(g.atoms[1].implicit_h == 2);
  CHECK(g.atoms[2].implicit_h == 1);
}

TEST_CASE("triangle ring closure") {
  const auto g = parse("C1CC1");
  CHECK(g.atoms.size() == 3);
  CHECK(g.bonds.size() == 3);
  CHECK(g.ring_count() == 1);
  CHECK(g.ring_closures.size() == 1);
}

TEST_CASE("syntax errors") {
  CHECK_THROWS_WITH_AS(parse("C(C"), doctest::Contains("unbalanced"), ParseError);
  CHECK_THROWS_AS(parse("C)C"), ParseError);
  CHECK_THROWS_WITH_AS(parse("C1CC2"), doctest::Contains("unclosed ring"), ParseError);
  CHECK_THROWS_AS(parse("=C"), ParseError);
  CHECK_THROWS_AS(parse("C="), ParseError);
  CHECK_THROWS_AS(parse("C(=)"), ParseError);
  CHECK_THROWS_AS(parse("(CC)"), ParseError);
  CHECK_THROWS_AS(parse("C.C"), ParseError);
  CHECK_THROWS_AS(parse("C11"), ParseError);
  CHECK_THROWS_AS(parse("1CC"), ParseError);
}

TEST_CASE("valence rules") {
  SUBCASE("pentavalent carbon is rejected") {
    CHECK_THROWS_WITH_AS(parse("C(C)(C)(C)(C)C"), doctest::Contains("valence overflow"),
                         ParseError);
    CHECK(!validate("C(C)(C)(C)(C)C"));
  }
  SUBCASE("sulfur multi-valence") {
    CHECK(validate("CS(=O)(=O)C"));  // sulfone, S at valence 6
    CHECK(validate("CSC"));          // thioether, valence 2
  }
  SUBCASE("charge-adjusted valence") {
    CHECK(validate("[NH4+]"));
    CHECK(validate("[O-]C"));
    CHECK(!validate("[NH5+]"));
    CHECK(parse("[NH4+]").atoms[0].implicit_h == 4);
  }
  SUBCASE("halogens are monovalent") {
    CHECK(validate("CCl"));
    CHECK(!validate("Cl(C)C"));
  }
}

TEST_CASE("aromatic handling") {
  SUBCASE("benzene") {
    const auto g = parse("c1ccccc1");
    CHECK(g.atoms.size() == 6);
    CHECK(g.bonds.size() == 6);
    for (const auto& a : g.atoms) {
      CHECK(a.aromatic);
      CHECK(a.implicit_h == 1);
    }
  }
  SUBCASE("pyridine nitrogen has no hydrogen") {
    const auto g = parse("c1ccncc1");
    int n_h = -1;
    for (const auto& a : g.atoms) {
      if (a.element == "N") n_h = a.implicit_h;
    }
    CHECK(n_h == 0);
  }
  SUBCASE("five-membered aromatics with pi-donor atoms") {
    CHECK(validate("c1cc[nH]c1"));  // pyrrole
    CHECK(validate("c1ccoc1"));     // furan
    CHECK(validate("c1ccsc1"));     // thiophene
  }
  SUBCASE("aromatic atom outside a ring is rejected") {
    CHECK(!validate("cC"));
  }
  SUBCASE("substituted benzene carbon has no hydrogen") {
    const auto g = parse("Cc1ccccc1");
    CHECK(g.atoms[1].implicit_h == 0);
  }
}

TEST_CASE("bond symbols and stereo markers") {
  CHECK(parse("C=C").bonds[0].order == 2);
  CHECK(parse("C#N").bonds[0].order == 3);
  CHECK(parse("C/C=C/C").atoms.size() == 4);  // stereo parsed, ignored
  const auto g = parse("C/C=C/C");
  CHECK(g.bonds[0].order == 1);
  CHECK(g.bonds[1].order == 2);
}

TEST_CASE("ring closure with explicit bond order") {
  const auto g = parse("C=1CCCCC=1");
  bool found_double = false;
  for (const auto& b : g.bonds) {
    if (b.order == 2) found_double = true;
  }
  CHECK(found_double);
  CHECK_THROWS_AS(parse("C=1CCCCC#1"), ParseError);  // conflicting closure orders
}

TEST_CASE("percent ring labels") {
  CHECK(validate("C%11CCCCC%11"));
  const auto g = parse("C%11CCCCC%11");
  CHECK(g.ring_count() == 1);
}

TEST_CASE("bracket atoms") {
  const auto g = parse("[NH3+]CC(=O)[O-]");
  CHECK(g.atoms[0].charge == 1);
  CHECK(g.atoms[0].implicit_h == 3);
  CHECK(g.atoms[3].element == "O");
  CHECK(g.atoms[4].charge == -1);
  CHECK_THROWS_AS(parse("[C"), ParseError);
  CHECK_THROWS_AS(parse("[]"), ParseError);
  CHECK_THROWS_AS(parse("[13C]"), ParseError);  // isotopes unsupported
  CHECK(validate("[H]O[H]"));
}

TEST_CASE("ring bond mask and rotatable bond prerequisites") {
  const auto g = parse("CCC1CCC1");  // ethyl on cyclobutane
  const auto mask = g.ring_bond_mask();
  int ring_bonds = 0;
  for (bool b : mask) ring_bonds += b ? 1 : 0;
  CHECK(ring_bonds == 4);
  CHECK(g.ring_count() == 1);
}

TEST_CASE("parser totality under byte fuzzing") {
  // No crash, no UB: every input either parses or throws ParseError.
  Rng rng(0xFABC);
  std::size_t parsed = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t len = 1 + rng.below(64);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      // Mix printable SMILES-ish characters and arbitrary bytes.
      if (rng.bernoulli(0.8)) {
        static const char alphabet[] = "CNOSPFIclnos=#()[]1234567890+-%/\\@BrH";
        s += alphabet[rng.below(sizeof(alphabet) - 1)];
      } else {
        s += static_cast<char>(rng.below(256));
      }
    }
    try {
      parse(s);
      ++parsed;
    } catch (const Error&) {
    }
  }
  CHECK(parsed >= 0);  // reaching here means no crash
}
