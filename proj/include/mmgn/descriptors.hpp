#pragma once

#include <array>
#include <bitset>
#include <map>
#include <string>
#include <vector>

#include "mmgn/parser.hpp"

namespace mmgn::desc {

constexpr std::size_t kFeatureDim = 10;
constexpr std::size_t kFingerprintBits = 2048;
constexpr int kFingerprintRadius = 2;

// Fixed feature order; PropertyVector selects a subset of these dims.
const std::array<std::string, kFeatureDim>& feature_labels();

struct FeatureVector {
  std::array<double, kFeatureDim> values{};

  double mw() const { return values[0]; }
  double logp() const { return values[1]; }
  double hbd() const { return values[2]; }
  double hba() const { return values[3]; }
  double tpsa() const { return values[4]; }
  double ring_count() const { return values[5]; }
  double aromatic_atoms() const { return values[6]; }
  double rotatable_bonds() const { return values[7]; }
  double heavy_atoms() const { return values[8]; }
  double logs() const { return values[9]; }
};

struct PropertyVector {
  std::vector<double> values;
  std::vector<std::string> labels;

  // Default conditioning targets: MW, logP, HBD, HBA.
  static PropertyVector from_features(const FeatureVector& f,
                                      const std::vector<std::size_t>& dims = {0, 1, 2, 3});
};

using Fingerprint = std::bitset<kFingerprintBits>;

// Pinned coefficient tables (atomic masses, logP contributions, TPSA
// fragment contributions, ESOL coefficients), loaded from a plain-text
// data file. Format: `<kind> <key> <value>` per line, '#' comments.
class Tables {
 public:
  static const Tables& instance();
  // Replace the process-wide tables (CLI --data-file override).
  static void load_from(const std::string& path);

  double mass(const std::string& element) const;
  double logp_contribution(const std::string& element, bool aromatic) const;
  double logp_hydrogen() const { return logp_h_; }
  double logp_charge_penalty() const { return logp_charge_; }
  double tpsa_contribution(const std::string& cls) const;
  double esol(const std::string& term) const;
  int version() const { return version_; }

 private:
  explicit Tables(const std::string& path);
  std::map<std::string, double> mass_;
  std::map<std::string, double> logp_;
  std::map<std::string, double> tpsa_;
  std::map<std::string, double> esol_;
  double logp_h_ = 0.0;
  double logp_charge_ = 0.0;
  int version_ = 0;
};

FeatureVector compute_features(const smiles::MoleculeGraph& g);

// Circular fingerprint: hash the canonical neighborhood signature of every
// atom at radii 0..2 (FNV-1a 64, mod 2048).
Fingerprint fingerprint(const smiles::MoleculeGraph& g);

// |a AND b| / |a OR b|; 1.0 when both empty.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// Geometric mean of four desirability ramps (MW 300 +- 200, logP 2.5 +- 2.5,
// HBD <= 5, HBA <= 10).
double druglikeness_proxy(const smiles::MoleculeGraph& g);

// 1 minus a normalized complexity penalty (rings > 3, heavy atoms > 35,
// charges, bracket atoms), clipped to [0, 1].
double synthesizability_proxy(const smiles::MoleculeGraph& g);

// Maps logS onto [0, 1]: clamp((logS + 8) / 8).
double solubility_score(double logs);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace mmgn::desc
