#include "neuroloop/classify/cohort.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "neuroloop/errors.hpp"
#include "neuroloop/sim/generator.hpp"

namespace neuroloop::classify {

namespace {
std::string participant_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02zu", i + 1);
  return buf;
}
}  // namespace

std::vector<FeatureVector> synthesize_cohort(const CohortOptions& o) {
  if (o.participants == 0 || o.epochs_per_class == 0 || o.rest_epochs == 0) {
    throw InvalidParameter("synthesize_cohort: counts must be > 0");
  }
  if (!(o.contrast >= 0.0 && o.contrast < 1.0 / 0.3)) {
    throw InvalidParameter("synthesize_cohort: contrast must be in [0, 3.33)");
  }
  FeatureOptions fo;
  const auto labels = fo.channels.delta.labels;  // union of frontal and posterior sets

  std::vector<FeatureVector> rows;
  for (std::size_t p = 0; p < o.participants; ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                      static_cast<std::uint32_t>(p)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double gain = std::exp(o.gain_sd * gauss(rng));
    const double shift = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);

    sim::GeneratorConfig gc;
    gc.channel_labels = labels;
    gc.bands = {dsp::BandRange(4.0 + shift, 8.0 + shift, dsp::BandName::Theta),
                dsp::BandRange(8.0 + shift, 13.0 + shift, dsp::BandName::Alpha)};
    const auto id = participant_name(p);

    auto epoch = [&](double factor) {
      sim::StateProfile prof = sim::StateProfile::neutral();
      prof.name = sim::StateName::Custom;
      prof.alpha_uv *= gain * factor;
      prof.theta_uv *= gain * factor;
      prof.noise_uv *= gain;
      return extract_features(sim::generate(prof, fo.epoch_seconds, rng(), gc), gc.bands, fo);
    };

    RestingBaselines rest;
    for (std::size_t e = 0; e < o.rest_epochs; ++e) rest.add(id, epoch(std::exp(o.epoch_sd * gauss(rng))));

    std::size_t index = 0;
    for (std::size_t e = 0; e < o.epochs_per_class; ++e) {
      for (Label l : {Label::Internal, Label::External}) {
        const double state = l == Label::Internal ? 1.0 + 0.3 * o.contrast : 1.0 - 0.3 * o.contrast;
        const auto raw = epoch(state * std::exp(o.epoch_sd * gauss(rng)));
        rows.push_back(normalize_to_rest(id, index++, raw, l, rest));
      }
    }
  }
  return rows;
}

}  // namespace neuroloop::classify
