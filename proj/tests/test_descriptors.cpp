#include <doctest.h>

#include <cmath>

#include "mmgn/descriptors.hpp"
#include "mmgn/parser.hpp"
#include "mmgn/rng.hpp"

using namespace mmgn;
using smiles::parse;

TEST_CASE("ethanol features") {
  const auto f = desc::compute_features(parse("CCO"));
  CHECK(f.mw() == doctest::Approx(46.07).epsilon(0.0005));
  CHECK(f.hbd() == 1);
  CHECK(f.hba() == 1);
  CHECK(f.heavy_atoms() == 3);
  CHECK(f.rotatable_bonds() == 0);
}

TEST_CASE("methane features") {
  const auto f = desc::compute_features(parse("C"));
  CHECK(f.ring_count() == 0);
  CHECK(f.aromatic_atoms() == 0);
  CHECK(f.rotatable_bonds() == 0);
  CHECK(f.mw() == doctest::Approx(16.043).epsilon(0.001));
}

TEST_CASE("benzene features") {
  const auto f = desc::compute_features(parse("c1ccccc1"));
  CHECK(f.aromatic_atoms() == 6);
  CHECK(f.ring_count() == 1);
  CHECK(f.hbd() == 0);
  CHECK(f.hba() == 0);
}

TEST_CASE("adding a CH2 raises MW by 14.027 and logP") {
  const auto butane = desc::compute_features(parse("CCCC"));
  const auto pentane = desc::compute_features(parse("CCCCC"));
  CHECK(pentane.mw() - butane.mw() == doctest::Approx(14.027).epsilon(1e-6));
  CHECK(pentane.logp() > butane.logp());
}

TEST_CASE("rotatable bond definition") {
  CHECK(desc::compute_features(parse("CCCC")).rotatable_bonds() == 1);
  CHECK(desc::compute_features(parse("CCCCC")).rotatable_bonds() == 2);
  CHECK(desc::compute_features(parse("C1CCCCC1")).rotatable_bonds() == 0);  // all ring
  CHECK(desc::compute_features(parse("C=CC=C")).rotatable_bonds() == 1);
}

TEST_CASE("tpsa and logs are finite and deterministic") {
  for (const char* s : {"CCO", "CC(=O)Oc1ccccc1C(=O)O", "c1ccncc1", "[NH3+]CC(=O)[O-]"}) {
    const auto f1 = desc::compute_features(parse(s));
    const auto f2 = desc::compute_features(parse(s));
    CHECK(std::isfinite(f1.tpsa()));
    CHECK(std::isfinite(f1.logs()));
    CHECK(std::isfinite(f1.logp()));
    CHECK(f1.values == f2.values);
  }
  CHECK(desc::compute_features(parse("CCO")).tpsa() == doctest::Approx(20.23));
  CHECK(desc::compute_features(parse("CCOC")).tpsa() == doctest::Approx(9.23));
}

TEST_CASE("hbd never exceeds N plus O count") {
  for (const char* s : {"CCO", "NCCN", "OC(=O)CN", "c1cc[nH]c1", "CC(N)C(O)CO"}) {
    const auto f = desc::compute_features(parse(s));
    CHECK(f.hbd() <= f.hba());
  }
}

TEST_CASE("feature permutation invariance") {
  const auto a = desc::compute_features(parse("CC(=O)Oc1ccccc1C(=O)O"));
  const auto b = desc::compute_features(parse("OC(=O)c1ccccc1OC(C)=O"));
  for (std::size_t i = 0; i < desc::kFeatureDim; ++i) {
    CAPTURE(i);
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("fingerprint basics") {
  SUBCASE("isomorphic graphs give identical fingerprints") {
    CHECK(desc::fingerprint(parse("OCC")) == desc::fingerprint(parse("CCO")));
    CHECK(desc::fingerprint(parse("c1ccccc1C")) == desc::fingerprint(parse("Cc1ccccc1")));
  }
  SUBCASE("single atom sets exactly one bit") {
    CHECK(desc::fingerprint(parse("C")).count() == 1);
  }
  SUBCASE("different molecules differ") {
    CHECK(desc::fingerprint(parse("CCO")) != desc::fingerprint(parse("CCN")));
  }
}

TEST_CASE("tanimoto similarity") {
  desc::Fingerprint a, b;
  SUBCASE("both empty defined as 1") { CHECK(desc::tanimoto(a, b) == 1.0); }
  SUBCASE("identical non-empty") {
    a.set(3);
    a.set(77);
    CHECK(desc::tanimoto(a, a) == 1.0);
  }
  SUBCASE("disjoint") {
    a.set(1);
    b.set(2);
    CHECK(desc::tanimoto(a, b) == 0.0);
  }
  SUBCASE("overlap one of three") {
    a.set(1);
    a.set(2);
    b.set(2);
    b.set(3);
    CHECK(desc::tanimoto(a, b) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("symmetry and range on molecule pairs") {
    const auto fa = desc::fingerprint(parse("CC(=O)O"));
    const auto fb = desc::fingerprint(parse("CCN"));
    CHECK(desc::tanimoto(fa, fb) == desc::tanimoto(fb, fa));
    CHECK(desc::tanimoto(fa, fb) >= 0.0);
    CHECK(desc::tanimoto(fa, fb) <= 1.0);
  }
}

TEST_CASE("druglikeness ramps") {
  SUBCASE("at the ramp maxima") {
    // MW near 300, logP near 2.5, few donors/acceptors: build a molecule
    // close to the ideal point and check the ramp math directly instead.
    const auto g = parse("CCCCCCCCCCCCCCCCCCCCC");  // heneicosane
    const auto f = desc::compute_features(g);
    const double score = desc::druglikeness_proxy(g);
    CHECK(score > 0.0);
    CHECK(score <= 1.0);
    CAPTURE(f.mw());
  }
  SUBCASE("monotone penalty away from the windows") {
    const double small = desc::druglikeness_proxy(parse("C"));
    const double closer = desc::druglikeness_proxy(parse("CCCCCCCCCC"));
    CHECK(closer > small);
  }
}

TEST_CASE("synthesizability proxy") {
  CHECK(desc::synthesizability_proxy(parse("C")) == 1.0);
  CHECK(desc::synthesizability_proxy(parse("CCO")) == 1.0);
  SUBCASE("charges and brackets are penalized") {
    CHECK(desc::synthesizability_proxy(parse("[NH3+]CC(=O)[O-]")) < 1.0);
  }
  SUBCASE("a 10-ring 60-atom monster is fully penalized") {
    // Chain of ten fused cyclohexanes plus a long tail.
    std::string s;
    for (int i = 0; i < 10; ++i) s += "C1CCCCC1";
    s += "CCCCCCCCCCCCCCCCCCCC";
    const auto g = parse(s);
    CHECK(g.ring_count() == 10);
    CHECK(g.atoms.size() == 80);
    CHECK(desc::synthesizability_proxy(g) == 0.0);
  }
}

TEST_CASE("solubility score maps into the unit interval") {
  CHECK(desc::solubility_score(0.0) == 1.0);
  CHECK(desc::solubility_score(-8.0) == 0.0);
  CHECK(desc::solubility_score(-4.0) == doctest::Approx(0.5));
  CHECK(desc::solubility_score(-100.0) == 0.0);
  CHECK(desc::solubility_score(100.0) == 1.0);
}

TEST_CASE("property vector selects labeled dims") {
  const auto f = desc::compute_features(parse("CCO"));
  const auto p = desc::PropertyVector::from_features(f);
  REQUIRE(p.values.size() == 4);
  CHECK(p.labels == std::vector<std::string>{"MW", "logP", "HBD", "HBA"});
  CHECK(p.values[0] == doctest::Approx(f.mw()));
  CHECK(p.values[2] == 1.0);
}
