#include "neuroloop/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "neuroloop/adapt/adapt.hpp"
#include "neuroloop/adapt/pipeline.hpp"
#include "neuroloop/bridge/orchestrator.hpp"
#include "neuroloop/bridge/server.hpp"
#include "neuroloop/bridge/session.hpp"
#include "neuroloop/classify/classify.hpp"
#include "neuroloop/classify/cohort.hpp"
#include "neuroloop/dsp/montage.hpp"
#include "neuroloop/errors.hpp"
#include "neuroloop/iaf/iaf.hpp"
#include "neuroloop/io/chunk_jsonl.hpp"
#include "neuroloop/sim/generator.hpp"

namespace neuroloop {

using nlohmann::json;

namespace {

struct SessionFlags {
  std::string policy = "positive";
  double threshold = adapt::kDefaultThreshold;
  double window_s = 20.0;
  double stream_initial = 115.0, stream_floor = 8.0, stream_ceiling = 400.0;
  std::string montage = "standard64";

  void add_to(CLI::App* app) {
    app->add_option("--policy", policy, "adaptation policy")
        ->check(CLI::IsMember({"positive", "negative", "none"}, CLI::ignore_case))
        ->capture_default_str();
    app->add_option("--threshold", threshold, "relative change counted as significant")->capture_default_str();
    app->add_option("--window-seconds", window_s, "tumbling window length")->capture_default_str();
    app->add_option("--stream-initial", stream_initial)->capture_default_str();
    app->add_option("--stream-floor", stream_floor)->capture_default_str();
    app->add_option("--stream-ceiling", stream_ceiling)->capture_default_str();
    app->add_option("--montage", montage, "channel montage name")->capture_default_str();
  }

  bridge::SessionConfig config() const {
    bridge::SessionConfig c;
    c.policy = adapt::policy_from_string(policy);
    c.threshold = threshold;
    c.window_s = window_s;
    c.stream = adapt::StreamState::starting_at(stream_initial, stream_floor, stream_ceiling);
    c.montage = montage;
    return bridge::resolve(c);
  }
};

// Decisions as JSON lines to `path`, or to `out` when path is empty.
void write_decisions(const std::vector<adapt::AdaptationDecision>& ds, const std::string& path,
                     std::ostream& out) {
  std::ofstream file;
  if (!path.empty()) {
    file.open(path);
    if (!file) throw ConfigurationError("cannot write " + path);
  }
  std::ostream& dst = path.empty() ? out : file;
  for (const auto& d : ds) dst << bridge::dump_line(adapt::to_json(d)) << '\n';
}

json decision_summary(const std::vector<adapt::AdaptationDecision>& ds, double initial) {
  std::size_t inc = 0, dec = 0, hold = 0;
  double sum = 0.0;
  for (const auto& d : ds) {
    inc += d.action == adapt::Action::Increase;
    dec += d.action == adapt::Action::Decrease;
    hold += d.action == adapt::Action::Hold;
    sum += d.stream_after;
  }
  return {{"decisions", ds.size()},
          {"increase", inc},
          {"decrease", dec},
          {"hold", hold},
          {"mean_stream", ds.empty() ? initial : sum / static_cast<double>(ds.size())},
          {"final_stream", ds.empty() ? initial : ds.back().stream_after}};
}

std::vector<classify::FeatureVector> load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path);
  return classify::read_features(in);
}

std::vector<std::string> bench_labels(std::size_t n) {
  const auto& all = dsp::standard64_labels();
  const auto need = dsp::ChannelSet::frontal_posterior_union().labels;
  std::vector<std::string> out(need.begin(), need.end());
  if (n < out.size()) throw ConfigurationError("bench needs at least " + std::to_string(out.size()) + " channels");
  for (const auto& l : all) {
    if (out.size() >= n) break;
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  for (std::size_t i = out.size(); i < n; ++i) out.push_back("X" + std::to_string(i + 1));
  return out;
}

}  // namespace

LatencyStats measure_window_latency(double window_s, std::size_t channels, std::size_t iterations,
                                    dsp::Exec exec) {
  if (iterations == 0) throw InvalidParameter("bench: iterations must be > 0");
  sim::GeneratorConfig g;
  g.channel_labels = bench_labels(channels);
  const std::array<dsp::EegChunk, 2> base = {sim::generate(sim::StateProfile::internal(), window_s, 1, g, exec),
                                             sim::generate(sim::StateProfile::external(), window_s, 2, g, exec)};
  adapt::PipelineConfig cfg;
  cfg.window_s = window_s;
  cfg.restrict_to_sets = false;
  cfg.exec = exec;
  cfg.engine.policy = adapt::Policy::Positive;
  adapt::OnlinePipeline pipeline(cfg);

  std::vector<double> ms;
  for (std::size_t k = 0; k <= iterations; ++k) {
    auto chunk = base[k % 2];
    chunk.set_start_time(window_s * static_cast<double>(k));
    const auto t0 = std::chrono::steady_clock::now();
    pipeline.ingest(chunk);
    const auto t1 = std::chrono::steady_clock::now();
    if (k > 0) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());  // first is warm-up
  }
  std::sort(ms.begin(), ms.end());
  LatencyStats s;
  s.window_s = window_s;
  s.channels = channels;
  s.iterations = iterations;
  s.min_ms = ms.front();
  s.max_ms = ms.back();
  s.median_ms = ms[ms.size() / 2];
  s.p95_ms = ms[std::min(ms.size() - 1, static_cast<std::size_t>(0.95 * static_cast<double>(ms.size())))];
  s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  s.realtime_factor = window_s * 1000.0 / s.max_ms;
  return s;
}

json to_json(const LatencyStats& s) {
  return {{"window_s", s.window_s},   {"channels", s.channels}, {"iterations", s.iterations},
          {"min_ms", s.min_ms},       {"median_ms", s.median_ms}, {"p95_ms", s.p95_ms},
          {"max_ms", s.max_ms},       {"mean_ms", s.mean_ms},   {"realtime_factor", s.realtime_factor}};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"neuroloop: closed-loop EEG adaptation server and tools", "neuroloop"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // serve
  auto* serve = app.add_subcommand("serve", "run the NDJSON stream server until SIGINT/SIGTERM");
  std::string bind = "127.0.0.1:5760";
  std::string log_dir = "neuroloop-logs";
  SessionFlags serve_flags;
  serve->add_option("--bind", bind, "host:port to listen on")->capture_default_str();
  serve->add_option("--log-dir", log_dir, "session log directory (NEUROLOOP_LOG_DIR wins)")->capture_default_str();
  serve_flags.add_to(serve);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a synthetic scenario through the online pipeline");
  std::string scenario_path, sim_out, record_path;
  std::optional<std::uint64_t> seed;
  SessionFlags sim_flags;
  simulate->add_option("--scenario", scenario_path, "scenario JSON file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "decision log (JSON lines); stdout when omitted");
  simulate->add_option("--record", record_path, "also write the generated chunks here");
  simulate->add_option("--seed", seed, "override the scenario seed");
  sim_flags.add_to(simulate);

  // replay
  auto* replay = app.add_subcommand("replay", "run a recorded chunk file through the online pipeline");
  std::string replay_in, replay_out;
  SessionFlags replay_flags;
  replay->add_option("--in", replay_in, "chunk file (eeg JSON lines)")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", replay_out, "decision log (JSON lines); stdout when omitted");
  replay_flags.add_to(replay);

  // iaf
  auto* iafc = app.add_subcommand("iaf", "estimate the individual alpha frequency of a recording");
  std::string iaf_in;
  iafc->add_option("--in", iaf_in, "recording as eeg JSON lines")->required()->check(CLI::ExistingFile);

  // classify
  auto* cls = app.add_subcommand("classify", "attention-state LDA");
  cls->require_subcommand(1);
  auto* train = cls->add_subcommand("train", "participant-wise split, train, report");
  std::string features, model_out;
  std::uint64_t train_seed = 0;
  double shrinkage = 0.1;
  train->add_option("--features", features, "feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", train_seed, "split seed")->capture_default_str();
  train->add_option("--shrinkage", shrinkage, "covariance shrinkage in [0, 1]")->capture_default_str();
  train->add_option("--out", model_out, "write the model JSON here");
  auto* eval = cls->add_subcommand("eval", "score a saved model on a feature file");
  std::string model_in, eval_features;
  eval->add_option("--model", model_in, "model JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--features", eval_features, "feature CSV")->required()->check(CLI::ExistingFile);
  auto* synth = cls->add_subcommand("synth", "write features of a simulated cohort");
  classify::CohortOptions cohort;
  std::string synth_out;
  synth->add_option("--out", synth_out, "feature CSV; stdout when omitted");
  synth->add_option("--seed", cohort.seed)->capture_default_str();
  synth->add_option("--participants", cohort.participants)->capture_default_str();
  synth->add_option("--epochs", cohort.epochs_per_class, "epochs per class and participant")->capture_default_str();
  synth->add_option("--contrast", cohort.contrast, "state contrast, 0 makes classes identical")
      ->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "per-window processing latency of the online pipeline");
  double bench_window = 20.0;
  std::size_t bench_channels = 64, bench_iters = 20;
  std::string bench_exec = "parallel";
  bench->add_option("--window-seconds", bench_window)->capture_default_str();
  bench->add_option("--channels", bench_channels)->capture_default_str();
  bench->add_option("--iterations", bench_iters)->capture_default_str();
  bench->add_option("--exec", bench_exec)->check(CLI::IsMember({"serial", "parallel"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*serve) {
      bridge::ServerOptions o;
      std::tie(o.host, o.port) = bridge::parse_bind(bind);
      o.defaults = serve_flags.config();
      o.log_dir = bridge::log_directory(log_dir);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);  // before any thread starts
      bridge::Server server(o);
      server.start();
      out << "listening on " << o.host << ":" << server.port() << " (logs in " << o.log_dir << ")" << std::endl;
      int sig = 0;
      sigwait(&set, &sig);
      server.stop();
      out << "stopped after " << server.connections_accepted() << " connections" << std::endl;
      return 0;
    }
    if (*simulate) {
      auto scenario = sim::load_scenario(scenario_path);
      if (seed) scenario.seed = *seed;
      auto cfg = sim_flags.config();
      if (scenario.channel_labels.empty()) scenario.channel_labels = cfg.channel_labels;
      cfg.channel_labels = scenario.channel_labels;
      cfg.sample_rate = scenario.sample_rate;
      std::vector<dsp::EegChunk> chunks;
      for (auto& c : sim::run_scenario(scenario)) chunks.push_back(std::move(c.chunk));
      if (!record_path.empty()) {
        std::ofstream rec(record_path);
        if (!rec) throw ConfigurationError("cannot write " + record_path);
        io::write_chunks(rec, chunks);
      }
      const auto ds = bridge::replay(cfg, chunks);
      write_decisions(ds, sim_out, out);
      if (!sim_out.empty()) out << decision_summary(ds, cfg.stream.initial).dump() << '\n';
      return 0;
    }
    if (*replay) {
      const auto chunks = sim::load_replay(replay_in);
      auto cfg = replay_flags.config();
      if (!chunks.empty()) {
        cfg.channel_labels = chunks.front().channel_labels();
        cfg.sample_rate = chunks.front().sample_rate();
      }
      const auto ds = bridge::replay(cfg, chunks);
      write_decisions(ds, replay_out, out);
      if (!replay_out.empty()) out << decision_summary(ds, cfg.stream.initial).dump() << '\n';
      return 0;
    }
    if (*iafc) {
      const auto chunks = sim::load_replay(iaf_in);
      if (chunks.empty()) throw InsufficientData("recording is empty");
      const auto e = iaf::estimate_iaf_raw(dsp::concatenate(chunks), dsp::ChannelSet::alpha_posterior());
      out << json{{"paf", e.paf}, {"cog", e.cog}, {"f_low", e.f_low}, {"f_high", e.f_high},
                  {"quality", iaf::to_string(e.quality)}}
                 .dump()
          << '\n';
      return 0;
    }
    if (*train) {
      const auto rows = load_features(features);
      std::vector<std::string> ids;
      for (const auto& r : rows) ids.push_back(r.participant_id);
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      const auto plan = classify::split_participants(ids, {12, 5, 5}, train_seed);
      classify::TrainOptions opt;
      opt.shrinkage = shrinkage;
      const auto tr = classify::rows_for(rows, plan.train_ids);
      const auto model = classify::train_lda(tr, opt);
      const auto val = classify::evaluate(model, classify::rows_for(rows, plan.val_ids));
      const auto test = classify::evaluate(model, classify::rows_for(rows, plan.test_ids));
      json report = {{"seed", train_seed},
                     {"accuracy", test.accuracy},
                     {"f1_external", test.f1_external},
                     {"weights", model.weights},
                     {"feature_order", classify::kFeatureNames},
                     {"bias", model.bias},
                     {"split", classify::to_json(plan)},
                     {"validation", classify::to_json(val)},
                     {"test", classify::to_json(test)}};
      if (!model_out.empty()) {
        std::ofstream m(model_out);
        if (!m) throw ConfigurationError("cannot write " + model_out);
        m << classify::to_json(model).dump(2) << '\n';
      }
      out << report.dump(2) << '\n';
      return 0;
    }
    if (*eval) {
      std::ifstream m(model_in);
      json j;
      try {
        j = json::parse(m);
      } catch (const json::parse_error& e) {
        throw ConfigurationError(std::string("model file: ") + e.what());
      }
      const auto model = classify::model_from_json(j);
      const auto rows = load_features(eval_features);
      out << classify::to_json(classify::evaluate(model, rows)).dump(2) << '\n';
      return 0;
    }
    if (*synth) {
      const auto rows = classify::synthesize_cohort(cohort);
      if (synth_out.empty()) {
        classify::write_features(out, rows);
      } else {
        std::ofstream f(synth_out);
        if (!f) throw ConfigurationError("cannot write " + synth_out);
        classify::write_features(f, rows);
      }
      return 0;
    }
    if (*bench) {
      const auto s = measure_window_latency(bench_window, bench_channels, bench_iters,
                                            bench_exec == "serial" ? dsp::Exec::Serial : dsp::Exec::Parallel);
      out << to_json(s).dump() << '\n';
      return 0;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << " (line " << e.line() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace neuroloop
