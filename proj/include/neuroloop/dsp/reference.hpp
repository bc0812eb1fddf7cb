#pragma once

// Serial, deliberately naive versions of the dsp kernels. They share no code
// with the optimized paths and exist so tests and the benchmark can compare
// against them.

#include <span>
#include <vector>

#include "neuroloop/dsp/eeg_chunk.hpp"
#include "neuroloop/dsp/filter.hpp"
#include "neuroloop/dsp/spectrum.hpp"

namespace neuroloop::dsp::reference {

// Direct form I evaluation of the cascaded difference equations, zero initial state.
std::vector<double> filter_direct(std::span<const double> x, const std::vector<Biquad>& sections);

// Welch PSD with an O(N^2) direct DFT per segment.
PsdEstimate welch_psd_dft(const EegChunk& window, const WelchOptions& opts = {});

}  // namespace neuroloop::dsp::reference
