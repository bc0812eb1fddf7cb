// Serial vs OpenMP kernels, and the naive reference versions where they exist.
// Run: ./build/bench/neuroloop_bench --benchmark_min_time=0.2

#include <benchmark/benchmark.h>

#include "neuroloop/adapt/pipeline.hpp"
#include "neuroloop/dsp/filter.hpp"
#include "neuroloop/dsp/reference.hpp"
#include "neuroloop/dsp/spectrum.hpp"
#include "neuroloop/sim/generator.hpp"

using namespace neuroloop;

namespace {

dsp::Exec exec_of(const benchmark::State& s) { return s.range(0) ? dsp::Exec::Parallel : dsp::Exec::Serial; }

const dsp::EegChunk& window64() {
  static const auto w = sim::generate(sim::StateProfile::internal(), 20.0, 1);
  return w;
}

// The reference DFT is O(N^2) per segment, so those comparisons use 4 channels.
const dsp::EegChunk& window4() {
  static const auto w = window64().select({"O1", "O2", "Oz", "Pz"});
  return w;
}

void label(benchmark::State& s) { s.SetLabel(s.range(0) ? "parallel" : "serial"); }

void BM_Filter(benchmark::State& s) {
  const auto chain = dsp::default_online_chain(500.0);
  for (auto _ : s) {
    dsp::StreamingFilter f(chain);
    benchmark::DoNotOptimize(f.process(window64(), exec_of(s)));
  }
  label(s);
}
BENCHMARK(BM_Filter)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FilterReference(benchmark::State& s) {
  std::vector<dsp::Biquad> sections;
  for (const auto& spec : dsp::default_online_chain(500.0))
    sections.insert(sections.end(), spec.sections.begin(), spec.sections.end());
  const auto& w = window64();
  for (auto _ : s) {
    for (std::size_t c = 0; c < w.n_channels(); ++c)
      benchmark::DoNotOptimize(dsp::reference::filter_direct(w.channel(c), sections));
  }
}
BENCHMARK(BM_FilterReference)->Unit(benchmark::kMillisecond);

void BM_Welch(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(dsp::welch_psd(window64(), {}, exec_of(s)));
  label(s);
}
BENCHMARK(BM_Welch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Welch4(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(dsp::welch_psd(window4(), {}, exec_of(s)));
  label(s);
}
BENCHMARK(BM_Welch4)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_WelchReference4(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(dsp::reference::welch_psd_dft(window4()));
}
BENCHMARK(BM_WelchReference4)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_Generate(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(sim::generate(sim::StateProfile::neutral(), 20.0, 7, {}, exec_of(s)));
  label(s);
}
BENCHMARK(BM_Generate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CommonAverage(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(dsp::common_average_reference(window64(), exec_of(s)));
  label(s);
}
BENCHMARK(BM_CommonAverage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// One full online window: filter, Welch, band power, engine step on 64 channels.
void BM_OnlineWindow(benchmark::State& s) {
  adapt::PipelineConfig cfg;
  cfg.restrict_to_sets = false;
  cfg.exec = exec_of(s);
  adapt::OnlinePipeline p(cfg);
  double t = 0.0;
  for (auto _ : s) {
    auto w = window64();
    w.set_start_time(t);
    t += 20.0;
    benchmark::DoNotOptimize(p.ingest(w));
  }
  label(s);
}
BENCHMARK(BM_OnlineWindow)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
