#include "neuroloop/classify/classify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "neuroloop/errors.hpp"

namespace neuroloop::classify {

using Vec = Eigen::Matrix<double, kFeatures, 1>;
using Mat = Eigen::Matrix<double, kFeatures, kFeatures>;

namespace {
Vec as_vec(const Features& f) { return Eigen::Map<const Vec>(f.data()); }
Features as_features(const Vec& v) {
  Features f;
  Eigen::Map<Vec>(f.data()) = v;
  return f;
}
}  // namespace

const char* to_string(Label l) { return l == Label::Internal ? "Internal" : "External"; }

Label label_from_string(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "internal") return Label::Internal;
  if (l == "external") return Label::External;
  throw ConfigurationError("unknown label: " + s);
}

Features extract_features(const dsp::EegChunk& epoch, const iaf::IndividualBands& bands,
                          const FeatureOptions& o) {
  if (std::abs(epoch.duration() - o.epoch_seconds) > 0.5 / epoch.sample_rate()) {
    throw InvalidParameter("extract_features: epoch must last " + std::to_string(o.epoch_seconds) + " s");
  }
  const auto psd = dsp::welch_psd(epoch, o.welch, o.exec);
  return {dsp::band_power(psd, o.fixed.delta, o.channels.delta),
          dsp::band_power(psd, bands.theta, o.channels.theta),
          dsp::band_power(psd, bands.alpha, o.channels.alpha),
          dsp::band_power(psd, o.fixed.beta, o.channels.beta),
          dsp::band_power(psd, o.fixed.gamma, o.channels.gamma)};
}

void RestingBaselines::add(const std::string& participant, const Features& raw) {
  auto& [sum, n] = sums_[participant];
  for (std::size_t k = 0; k < kFeatures; ++k) sum[k] += raw[k];
  ++n;
}

Features RestingBaselines::mean(const std::string& participant) const {
  const auto it = sums_.find(participant);
  if (it == sums_.end()) throw BaselineMissing("no resting baseline for participant " + participant);
  Features m = it->second.first;
  for (double& v : m) v /= static_cast<double>(it->second.second);
  return m;
}

FeatureVector normalize_to_rest(const std::string& participant, std::size_t epoch_index,
                                const Features& raw, std::optional<Label> label,
                                const RestingBaselines& baselines) {
  const auto base = baselines.mean(participant);
  FeatureVector fv{participant, epoch_index, {}, label};
  for (std::size_t k = 0; k < kFeatures; ++k) {
    if (!(base[k] > 0.0)) {
      throw DegenerateBaseline(std::string("resting ") + kFeatureNames[k] + " power is zero for " + participant);
    }
    fv.x[k] = raw[k] / base[k];
  }
  return fv;
}

SplitPlan split_participants(std::vector<std::string> ids, std::array<std::size_t, 3> ratios,
                             std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw InvalidParameter("split_participants: duplicate participant ids");
  }
  const std::size_t n = ids.size();
  if (n < ratios.size()) throw InsufficientData("split_participants: need at least 3 participants");
  const std::size_t total = ratios[0] + ratios[1] + ratios[2];
  if (total == 0 || std::find(ratios.begin(), ratios.end(), 0u) != ratios.end()) {
    throw InvalidParameter("split_participants: ratios must be positive");
  }

  std::array<std::size_t, 3> size{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    const double exact = static_cast<double>(n * ratios[b]) / static_cast<double>(total);
    size[b] = static_cast<std::size_t>(std::floor(exact));
    rem[b] = exact - static_cast<double>(size[b]);
    used += size[b];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  // ties go to the earlier bucket
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++size[order[i % 3]];
  for (std::size_t b = 0; b < 3; ++b) {
    while (size[b] == 0) {
      const auto big = static_cast<std::size_t>(std::max_element(size.begin(), size.end()) - size.begin());
      --size[big];
      ++size[b];
    }
  }

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  SplitPlan p;
  std::vector<std::string>* buckets[3] = {&p.train_ids, &p.val_ids, &p.test_ids};
  auto it = ids.begin();
  for (std::size_t b = 0; b < 3; ++b) {
    const auto k = static_cast<std::ptrdiff_t>(size[b]);
    buckets[b]->assign(it, it + k);
    std::sort(buckets[b]->begin(), buckets[b]->end());
    it += k;
  }
  return p;
}

std::vector<FeatureVector> rows_for(std::span<const FeatureVector> rows,
                                    const std::vector<std::string>& participants) {
  const std::set<std::string> keep(participants.begin(), participants.end());
  std::vector<FeatureVector> out;
  for (const auto& r : rows) {
    if (keep.count(r.participant_id)) out.push_back(r);
  }
  return out;
}

double LdaModel::score(std::span<const double> x) const {
  if (x.size() != kFeatures) {
    throw InvalidParameter("expected " + std::to_string(kFeatures) + " features, got " + std::to_string(x.size()));
  }
  double s = bias;
  for (std::size_t k = 0; k < kFeatures; ++k) s += weights[k] * x[k];
  return s;
}

LdaModel train_lda(std::span<const FeatureVector> train, const TrainOptions& o) {
  if (!(o.shrinkage >= 0.0 && o.shrinkage <= 1.0)) throw InvalidParameter("shrinkage must be in [0, 1]");
  Vec sum[2] = {Vec::Zero(), Vec::Zero()};
  std::size_t count[2] = {0, 0};
  for (const auto& r : train) {
    if (!r.label) throw InvalidParameter("train_lda: unlabelled row for " + r.participant_id);
    for (double v : r.x) {
      if (!std::isfinite(v)) throw InvalidParameter("train_lda: non-finite feature for " + r.participant_id);
    }
    const int c = *r.label == Label::External ? 1 : 0;
    sum[c] += as_vec(r.x);
    ++count[c];
  }
  if (count[0] == 0 || count[1] == 0) throw InvalidParameter("train_lda: both classes are required");
  if (count[0] < o.min_rows_per_class || count[1] < o.min_rows_per_class) {
    throw InsufficientData("train_lda: need at least " + std::to_string(o.min_rows_per_class) +
                           " rows per class");
  }
  const Vec mu_i = sum[0] / static_cast<double>(count[0]);
  const Vec mu_e = sum[1] / static_cast<double>(count[1]);

  Mat scatter = Mat::Zero();
  for (const auto& r : train) {
    const Vec d = as_vec(r.x) - (*r.label == Label::External ? mu_e : mu_i);
    scatter += d * d.transpose();
  }
  const double n = static_cast<double>(count[0] + count[1]);
  const Mat pooled = scatter / (n - 2.0);
  const double scale = pooled.trace() / static_cast<double>(kFeatures);
  const Mat sigma = (1.0 - o.shrinkage) * pooled + o.shrinkage * scale * Mat::Identity();

  const Eigen::SelfAdjointEigenSolver<Mat> eig(sigma, Eigen::EigenvaluesOnly);
  const auto ev = eig.eigenvalues();
  if (eig.info() != Eigen::Success || !(scale > 0.0) || !(ev.minCoeff() > 1e-12 * ev.maxCoeff())) {
    throw NumericalError("pooled covariance is singular; use shrinkage > 0");
  }
  const Vec w = sigma.ldlt().solve(mu_e - mu_i);

  LdaModel m;
  m.shrinkage = o.shrinkage;
  if (!o.equal_priors) {
    m.prior_internal = static_cast<double>(count[0]) / n;
    m.prior_external = static_cast<double>(count[1]) / n;
  }
  m.weights = as_features(w);
  m.bias = -w.dot(0.5 * (mu_e + mu_i)) + std::log(m.prior_external / m.prior_internal);
  m.mean_internal = as_features(mu_i);
  m.mean_external = as_features(mu_e);
  for (double v : m.weights) {
    if (!std::isfinite(v)) throw NumericalError("non-finite discriminant weights");
  }
  return m;
}

Prediction predict(const LdaModel& model, std::span<const double> x) {
  const double s = model.score(x);
  return {s >= 0.0 ? Label::External : Label::Internal, s};
}

Metrics metrics_from_confusion(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  const std::size_t total = tp + fp + fn + tn;
  if (total == 0) throw InsufficientData("evaluate: empty test set");
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  const std::size_t denom = 2 * tp + fp + fn;
  m.f1_external = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  return m;
}

Metrics evaluate(const LdaModel& model, std::span<const FeatureVector> test) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& r : test) {
    if (!r.label) throw InvalidParameter("evaluate: unlabelled row for " + r.participant_id);
    const bool truth = *r.label == Label::External;
    const bool said = predict(model, r).label == Label::External;
    if (truth && said) ++tp;
    else if (!truth && said) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  return metrics_from_confusion(tp, fp, fn, tn);
}

nlohmann::json to_json(const LdaModel& m) {
  return {{"features", kFeatureNames},
          {"weights", m.weights},
          {"bias", m.bias},
          {"priors", {{"internal", m.prior_internal}, {"external", m.prior_external}}},
          {"shrinkage", m.shrinkage},
          {"mean_internal", m.mean_internal},
          {"mean_external", m.mean_external},
          {"positive_score", "External"}};
}

LdaModel model_from_json(const nlohmann::json& j) {
  try {
    LdaModel m;
    if (j.contains("features") && j.at("features").get<std::vector<std::string>>() !=
                                      std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end())) {
      throw ConfigurationError("model feature order differs from delta,theta,alpha,beta,gamma");
    }
    m.weights = j.at("weights").get<Features>();
    m.bias = j.at("bias").get<double>();
    m.prior_internal = j.at("priors").at("internal").get<double>();
    m.prior_external = j.at("priors").at("external").get<double>();
    m.shrinkage = j.value("shrinkage", 0.1);
    m.mean_internal = j.value("mean_internal", Features{});
    m.mean_external = j.value("mean_external", Features{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("model: ") + e.what());
  }
}

nlohmann::json to_json(const SplitPlan& p) {
  return {{"train", p.train_ids}, {"val", p.val_ids}, {"test", p.test_ids}};
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"f1_external", m.f1_external},
          {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}}}};
}

namespace {
constexpr const char* kHeader = "participant_id,epoch_index,label,delta,theta,alpha,beta,gamma";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace

void write_features(std::ostream& out, std::span<const FeatureVector> rows) {
  out << kHeader << "\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    if (r.participant_id.find(',') != std::string::npos) {
      throw InvalidParameter("participant id contains a comma: " + r.participant_id);
    }
    out << r.participant_id << ',' << r.epoch_index << ',' << (r.label ? to_string(*r.label) : "");
    for (double v : r.x) out << ',' << v;
    out << "\n";
  }
  out.precision(old);
}

std::vector<FeatureVector> read_features(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto strip = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw ParseError("feature file is empty", 1);
  ++lineno;
  strip(line);
  if (line != kHeader) throw ParseError(std::string("expected header: ") + kHeader, 1);
  std::vector<FeatureVector> rows;
  while (std::getline(in, line)) {
    ++lineno;
    strip(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3 + kFeatures) {
      throw ParseError("expected 8 columns, got " + std::to_string(cells.size()), lineno);
    }
    FeatureVector fv;
    try {
      fv.participant_id = cells[0];
      if (fv.participant_id.empty()) throw ParseError("empty participant_id", lineno);
      std::size_t pos = 0;
      fv.epoch_index = std::stoull(cells[1], &pos);
      if (pos != cells[1].size()) throw ParseError("bad epoch_index", lineno);
      if (!cells[2].empty()) fv.label = label_from_string(cells[2]);
      for (std::size_t k = 0; k < kFeatures; ++k) {
        fv.x[k] = std::stod(cells[3 + k], &pos);
        if (pos != cells[3 + k].size() || !std::isfinite(fv.x[k])) {
          throw ParseError(std::string("bad value for ") + kFeatureNames[k], lineno);
        }
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad row: ") + e.what(), lineno);
    }
    rows.push_back(std::move(fv));
  }
  return rows;
}

}  // namespace neuroloop::classify
