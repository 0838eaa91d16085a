#pragma once

#include <string>
#include <vector>

#include "mmgn/error.hpp"

namespace mmgn::smiles {

struct Atom {
  std::string element;    // canonical symbol, e.g. "C", "Cl"
  int charge = 0;
  bool aromatic = false;
  bool bracket = false;   // written as a bracket atom in the input
  int declared_h = -1;    // bracket H count; -1 means "compute implicitly"
  int implicit_h = 0;     // resolved hydrogen count (declared for brackets)
};

struct Bond {
  int a = 0;
  int b = 0;
  int order = 1;          // 1, 2, 3; aromatic bonds carry order 1 + flag
  bool aromatic = false;
};

struct MoleculeGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<std::pair<int, int>> ring_closures;  // atom pairs bonded via ring digits

  // Bond indices incident to each atom.
  std::vector<std::vector<int>> adjacency() const;
  // True for bonds that lie on a cycle (non-bridges).
  std::vector<bool> ring_bond_mask() const;
  // Cyclomatic number: bonds - atoms + 1 for a connected graph.
  int ring_count() const {
    return static_cast<int>(bonds.size()) - static_cast<int>(atoms.size()) + 1;
  }
  int total_h(int atom) const { return atoms[static_cast<std::size_t>(atom)].implicit_h; }
};

// Full SMILES parse over the supported subset: organic atoms B C N O P S
// F Cl Br I, aromatic b c n o p s, bracket atoms with charge and H count,
// bonds - = # : / \ (stereo ignored), branches, ring closures incl. %nn.
// Throws ParseError on syntax or valence violations.
MoleculeGraph parse(const std::string& s);

// True iff parse succeeds. Never throws.
bool validate(const std::string& s);

// Maximum allowed valence for an element after charge adjustment; used by
// the parser and by the canonical writer.
const std::vector<int>& element_valences(const std::string& element);

// Implicit hydrogen count a bare (non-bracket) atom would get for the given
// bonded-order total; -1 if the total exceeds every allowed valence.
int implied_hydrogens(const std::string& element, int charge, int bonded_total);

}  // namespace mmgn::smiles
