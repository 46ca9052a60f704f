#ifndef CATFIT_SIMULATE_HPP
#define CATFIT_SIMULATE_HPP

#include "catfit/models.hpp"

namespace catfit {

// Synthetic data generator for recovery studies: sample category-
// conditional Gaussian features, compute true choice probabilities under a
// chosen model, sample binomial judgments.
struct GeneratorSpec {
  ModelVariant model = ModelVariant::Identity;
  double gamma = 1.0;
  double beta = 1.0;           // exemplar models only
  int n_stimuli = 200;
  int n_features = 4;
  int trials_per_stimulus = 100;

  // "gaussian": category means at -/+ separation/2 on every dimension.
  // "xor": two Gaussian clusters per category on the first two dimensions
  // at (+arm, +arm)/(-arm, -arm) vs (+arm, -arm)/(-arm, +arm); linear
  // boundaries provably cannot separate them.
  std::string layout = "gaussian";
  double separation = 1.5;
  double noise_sd = 1.0;
  double xor_arm = 2.0;

  void validate() const;
};

struct SimulatedData {
  FeatureMatrix features;
  JudgmentSet judgments;
  ModelState truth_state;   // statistics frozen over all generated stimuli
  Vector p_b;               // true per-stimulus choice probabilities
  double truth_nll = 0.0;   // NLL of the generating parameters on the sample
};

SimulatedData simulate_dataset(const GeneratorSpec& gen, std::uint64_t seed);

nlohmann::json truth_json(const GeneratorSpec& gen, const SimulatedData& data,
                          std::uint64_t seed);

}  // namespace catfit

#endif  // CATFIT_SIMULATE_HPP
