#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "neuroloop/classify/classify.hpp"

namespace neuroloop::classify {

// Simulated participants: resting (Neutral) epochs for the baseline, then
// labelled Internal/External epochs, each run through extract_features and
// normalize_to_rest.
struct CohortOptions {
  std::size_t participants = 22;
  std::size_t epochs_per_class = 6;
  std::size_t rest_epochs = 2;
  // Amplitude factor of the two states is 1 +- 0.3 * contrast; 0 makes them identical.
  double contrast = 1.0;
  double gain_sd = 0.3;   // between-participant log-amplitude spread
  double epoch_sd = 0.1;  // epoch-to-epoch log-amplitude spread
  std::uint64_t seed = 0;
};

std::vector<FeatureVector> synthesize_cohort(const CohortOptions& options);

}  // namespace neuroloop::classify
