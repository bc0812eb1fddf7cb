#pragma once

namespace neuroloop::dsp {

// Whether a per-channel kernel may fan out over OpenMP threads.
enum class Exec { Serial, Parallel };

}  // namespace neuroloop::dsp
