#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mmgn/descriptors.hpp"
#include "mmgn/rng.hpp"

namespace mmgn::metrics {

// Fraction of strings that parse. Errors on an empty list.
double validity(const std::vector<std::string>& generated);

// Distinct canonical forms among valid strings / valid count.
double uniqueness(const std::vector<std::string>& generated);

// Distinct valid canonical forms absent from the training set / distinct
// valid canonical forms. `train_canonical` holds canonical forms.
double novelty(const std::vector<std::string>& generated,
               const std::set<std::string>& train_canonical);

// 1 - mean pairwise Tanimoto over distinct valid molecules; pair sampling
// (1000 pairs, seeded) when the pair count exceeds 1e6.
double diversity(const std::vector<std::string>& generated, std::uint64_t seed = 0);

struct PropertyStats {
  std::vector<std::string> labels;
  std::vector<double> mad;  // mean absolute deviation per dim
  std::vector<double> sd;   // population std of signed deviations per dim
  std::size_t n_valid = 0;
};

PropertyStats property_stats(const std::vector<std::string>& generated,
                             const desc::PropertyVector& target);

enum class HBondKind { kDonor, kAcceptor };

// Fraction of valid molecules whose HBD/HBA equals the integer target.
double cgsr(const std::vector<std::string>& generated, int target, HBondKind kind);

// Min-max normalization across models; zero range maps to 0.5 everywhere.
std::vector<double> min_max_normalize(const std::vector<double>& values, bool lower_better);

// One row of the model-comparison table; percentages as printed.
struct ModelRow {
  std::string name;
  double valid = 0.0;
  double unique = 0.0;
  double time_h = 0.0;
  double diversity = 0.0;
  double druglikeness = 0.0;
  double synthesizability = 0.0;
  double solubility = 0.0;
};

// Unweighted mean of the seven min-max normalized metrics, time inverted.
std::vector<double> overall_score(const std::vector<ModelRow>& rows);

struct MetricReport {
  std::size_t n_generated = 0;
  std::size_t n_valid = 0;
  double valid = 0.0;            // percent
  std::optional<double> unique;  // percent; unset when no valid molecules
  std::optional<double> novel;   // percent; needs a training set
  double time_h = 0.0;
  std::optional<double> diversity;
  std::optional<double> druglikeness;
  std::optional<double> synthesizability;
  std::optional<double> solubility;
  double overall = 0.5;          // single-run zero-range rule
  std::optional<PropertyStats> property;  // with targets
  std::optional<double> cgsr_hbd;
  std::optional<double> cgsr_hba;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

struct EvaluateOptions {
  std::uint64_t seed = 0;
  double time_h = 0.0;
  std::optional<desc::PropertyVector> target;
  std::optional<int> target_hbd;
  std::optional<int> target_hba;
};

// Full single-run report. Zero valid molecules yields validity 0 with the
// other metrics unset (reporting, not failure).
MetricReport evaluate(const std::vector<std::string>& generated,
                      const std::vector<std::string>& train_lines, const EvaluateOptions& opts);

}  // namespace mmgn::metrics
