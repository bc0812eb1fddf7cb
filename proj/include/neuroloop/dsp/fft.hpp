#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace neuroloop::dsp {

// Real-input FFT of a fixed length backed by FFTW. Plans are created once per
// length (guarded by a global mutex) and executed on caller-owned buffers, so a
// single RealFft may be used from several threads at once.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // Buffers must come from FftBuffer so they share the planner's alignment.
  // in: n samples, out: n/2+1 bins.
  void forward(std::span<double> in, std::span<std::complex<double>> out) const;
  // Unnormalized inverse: out = sum_k X[k] e^{+2 pi i k n / N}. Destroys `in`.
  void inverse(std::span<std::complex<double>> in, std::span<double> out) const;

 private:
  std::size_t n_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

// Heap buffer with the alignment FFTW plans were created with.
template <typename T>
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n);
  ~FftBuffer();
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  std::span<T> span() { return {data_, n_}; }
  T* data() { return data_; }
  std::size_t size() const { return n_; }

 private:
  T* data_;
  std::size_t n_;
};

}  // namespace neuroloop::dsp
