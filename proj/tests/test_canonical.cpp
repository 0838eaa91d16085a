#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "mmgn/canonical.hpp"
#include "mmgn/parser.hpp"
#include "mmgn/rng.hpp"

using namespace mmgn;
using smiles::canonical_form;
using smiles::MoleculeGraph;
using smiles::parse;

namespace {

// Relabels atoms by a permutation; the molecule is unchanged.
MoleculeGraph permute_graph(const MoleculeGraph& g, const std::vector<std::size_t>& perm) {
  MoleculeGraph out;
  out.atoms.resize(g.atoms.size());
  for (std::size_t i = 0; i < g.atoms.size(); ++i) out.atoms[perm[i]] = g.atoms[i];
  for (const auto& b : g.bonds) {
    smiles::Bond nb = b;
    nb.a = static_cast<int>(perm[static_cast<std::size_t>(b.a)]);
    nb.b = static_cast<int>(perm[static_cast<std::size_t>(b.b)]);
    out.bonds.push_back(nb);
  }
  return out;
}

}  // namespace

TEST_CASE("same molecule two spellings") {
  CHECK(canonical_form(parse("OCC")) == canonical_form(parse("CCO")));
  CHECK(canonical_form(parse("C(C)O")) == canonical_form(parse("CCO")));
  CHECK(canonical_form(parse("C(O)C")) == canonical_form(parse("CCO")));
}

TEST_CASE("ring label invariance") {
  CHECK(canonical_form(parse("C1CC1")) == canonical_form(parse("C2CC2")));
  CHECK(canonical_form(parse("c1ccccc1")) == canonical_form(parse("c2ccccc2")));
  CHECK(canonical_form(parse("C%45CC%45")) == canonical_form(parse("C1CC1")));
}

TEST_CASE("canonical form is idempotent") {
  const std::vector<std::string> molecules = {
      "CCO",        "c1ccccc1",      "CC(=O)Oc1ccccc1C(=O)O", "C1CCNCC1",
      "CC(C)(C)O",  "N#Cc1ccccc1",   "CS(=O)(=O)N",           "[NH3+]CC(=O)[O-]",
      "FC(F)(F)c1ccc(Cl)cc1",        "C1CC2CCC1CC2",          "c1cc[nH]c1"};
  for (const std::string& s : molecules) {
    const std::string canon = canonical_form(parse(s));
    CAPTURE(s);
    CAPTURE(canon);
    CHECK(canonical_form(parse(canon)) == canon);
  }
}

TEST_CASE("atom permutation oracle") {
  const std::vector<std::string> molecules = {
      "CCO",
      "CC(C)CC",
      "c1ccccc1",
      "c1ccc(CCN)cc1",
      "CC(=O)Oc1ccccc1C(=O)O",
      "C1CCC(CC1)N",
      "ClCc1ccco1",
      "CC(C)(C)OC(=O)N",
      "C1CC2CCC1CC2",
      "CN1CCCC1",
  };
  Rng rng(0xCAFE);
  for (const std::string& s : molecules) {
    const MoleculeGraph base = parse(s);
    const std::string expected = canonical_form(base);
    std::set<std::string> forms = {expected};
    for (int trial = 0; trial < 50; ++trial) {
      const auto perm = rng.permutation(base.atoms.size());
      forms.insert(canonical_form(permute_graph(base, perm)));
    }
    CAPTURE(s);
    CHECK(forms.size() == 1);
  }
}

TEST_CASE("canonical output reparses to an isomorphic graph") {
  const std::vector<std::string> molecules = {"CC(=O)NC", "c1ccncc1", "CC(C)=CC",
                                              "OC(=O)c1ccccc1O", "C#CCO"};
  for (const std::string& s : molecules) {
    const MoleculeGraph g = parse(s);
    const std::string canon = canonical_form(g);
    CAPTURE(s);
    CAPTURE(canon);
    const MoleculeGraph re = parse(canon);
    CHECK(re.atoms.size() == g.atoms.size());
    CHECK(re.bonds.size() == g.bonds.size());
    // Hydrogen totals must survive the round trip.
    int h_before = 0, h_after = 0;
    for (const auto& a : g.atoms) h_before += a.implicit_h;
    for (const auto& a : re.atoms) h_after += a.implicit_h;
    CHECK(h_before == h_after);
  }
}

TEST_CASE("distinct molecules get distinct canonical forms") {
  const std::vector<std::string> molecules = {"CCO", "CCN", "CCC", "CC=O", "OCC(O)CO",
                                              "c1ccccc1", "C1CCCCC1"};
  std::set<std::string> forms;
  for (const std::string& s : molecules) forms.insert(canonical_form(parse(s)));
  CHECK(forms.size() == molecules.size());
}

TEST_CASE("charged and bracket atoms survive canonicalization") {
  const std::string canon = canonical_form(parse("[NH3+]CC(=O)[O-]"));
  const MoleculeGraph re = parse(canon);
  int plus = 0, minus = 0;
  for (const auto& a : re.atoms) {
    if (a.charge > 0) ++plus;
    if (a.charge < 0) ++minus;
  }
  CHECK(plus == 1);
  CHECK(minus == 1);
}
