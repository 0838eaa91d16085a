#pragma once

#include <string>
#include <vector>

#include "mmgn/parser.hpp"

namespace mmgn::smiles {

// Deterministic canonical SMILES: Morgan-style rank refinement (seeded by
// element, degree, charge, H count; 10 rounds) followed by DFS emission
// from the lowest-ranked atom. Self-consistent across input respellings;
// not aligned with any external toolkit's canonical form.
std::string canonical_form(const MoleculeGraph& g);

// Refined atom ranks, exposed for fingerprinting and tests.
std::vector<int> canonical_ranks(const MoleculeGraph& g);

}  // namespace mmgn::smiles
