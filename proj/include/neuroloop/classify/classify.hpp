#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/exec.hpp"
#include "neuroloop/dsp/spectrum.hpp"
#include "neuroloop/iaf/iaf.hpp"

namespace neuroloop::classify {

inline constexpr std::size_t kFeatures = 5;
using Features = std::array<double, kFeatures>;  // delta, theta, alpha, beta, gamma

inline constexpr std::array<const char*, kFeatures> kFeatureNames = {"delta", "theta", "alpha", "beta",
                                                                     "gamma"};

enum class Label { Internal, External };

const char* to_string(Label l);
Label label_from_string(const std::string& s);

struct FixedBands {
  dsp::BandRange delta{0.5, 4.0, dsp::BandName::Delta};
  dsp::BandRange beta{13.0, 30.0, dsp::BandName::Beta};
  dsp::BandRange gamma{30.0, 45.0, dsp::BandName::Gamma};
};

struct ChannelMap {
  dsp::ChannelSet delta = dsp::ChannelSet::frontal_posterior_union();
  dsp::ChannelSet theta = dsp::ChannelSet::theta_frontal();
  dsp::ChannelSet alpha = dsp::ChannelSet::alpha_posterior();
  dsp::ChannelSet beta = dsp::ChannelSet::theta_frontal();
  dsp::ChannelSet gamma = dsp::ChannelSet::frontal_posterior_union();
};

struct FeatureOptions {
  FixedBands fixed{};
  ChannelMap channels{};
  double epoch_seconds = 20.0;
  dsp::WelchOptions welch{};
  dsp::Exec exec = dsp::Exec::Parallel;
};

// Raw band powers (µV²) of one epoch.
Features extract_features(const dsp::EegChunk& epoch, const iaf::IndividualBands& bands,
                          const FeatureOptions& options = {});

struct FeatureVector {
  std::string participant_id;
  std::size_t epoch_index = 0;
  Features x{};
  std::optional<Label> label;
};

// Per-participant mean resting band powers.
class RestingBaselines {
 public:
  void add(const std::string& participant, const Features& raw);
  // BaselineMissing when the participant has no resting epochs.
  Features mean(const std::string& participant) const;
  bool contains(const std::string& participant) const { return sums_.count(participant) != 0; }

 private:
  std::map<std::string, std::pair<Features, std::size_t>> sums_;
};

// x / resting mean, band by band. Zero baselines raise DegenerateBaseline.
FeatureVector normalize_to_rest(const std::string& participant, std::size_t epoch_index,
                                const Features& raw, std::optional<Label> label,
                                const RestingBaselines& baselines);

struct SplitPlan {
  std::vector<std::string> train_ids, val_ids, test_ids;
};

// Seeded shuffle of the sorted unique ids, then largest-remainder allocation by
// ratio, at least one participant per bucket.
SplitPlan split_participants(std::vector<std::string> ids, std::array<std::size_t, 3> ratios = {12, 5, 5},
                             std::uint64_t seed = 0);

std::vector<FeatureVector> rows_for(std::span<const FeatureVector> rows,
                                    const std::vector<std::string>& participants);

struct TrainOptions {
  double shrinkage = 0.1;  // toward (trace/d) * I
  std::size_t min_rows_per_class = 6;
  bool equal_priors = false;
};

struct LdaModel {
  Features weights{};
  double bias = 0.0;
  double prior_internal = 0.5;
  double prior_external = 0.5;
  double shrinkage = 0.1;
  Features mean_internal{};
  Features mean_external{};

  // w.x + b; positive means External.
  double score(std::span<const double> x) const;
};

LdaModel train_lda(std::span<const FeatureVector> train, const TrainOptions& options = {});

struct Prediction {
  Label label;
  double score;
};

// score >= 0 is External.
Prediction predict(const LdaModel& model, std::span<const double> x);
inline Prediction predict(const LdaModel& model, const FeatureVector& fv) { return predict(model, fv.x); }

struct Metrics {
  double accuracy = 0.0;
  double f1_external = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// F1 with no External rows and no External predictions is reported as 1.
Metrics metrics_from_confusion(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
Metrics evaluate(const LdaModel& model, std::span<const FeatureVector> test);

nlohmann::json to_json(const LdaModel& m);
LdaModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitPlan& p);
nlohmann::json to_json(const Metrics& m);

// CSV: participant_id,epoch_index,label,delta,theta,alpha,beta,gamma
void write_features(std::ostream& out, std::span<const FeatureVector> rows);
// ParseError carries the 1-based line number. An empty label cell is allowed.
std::vector<FeatureVector> read_features(std::istream& in);

}  // namespace neuroloop::classify
