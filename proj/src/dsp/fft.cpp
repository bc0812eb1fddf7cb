#include "neuroloop/dsp/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "neuroloop/errors.hpp"

namespace neuroloop::dsp {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

template <typename T>
FftBuffer<T>::FftBuffer(std::size_t n)
    : data_(static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)))), n_(n) {
  if (data_ == nullptr) throw std::bad_alloc();
}

template <typename T>
FftBuffer<T>::~FftBuffer() {
  fftw_free(data_);
}

template class FftBuffer<double>;
template class FftBuffer<std::complex<double>>;

struct RealFft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

RealFft::RealFft(std::size_t n) : n_(n), plans_(std::make_unique<Plans>()) {
  if (n < 2) throw InvalidParameter("RealFft: length must be >= 2");
  FftBuffer<double> re(n);
  FftBuffer<std::complex<double>> cx(n / 2 + 1);
  auto* c = reinterpret_cast<fftw_complex*>(cx.data());
  std::lock_guard lock(planner_mutex());
  const int len = static_cast<int>(n);
  plans_->forward = fftw_plan_dft_r2c_1d(len, re.data(), c, FFTW_ESTIMATE);
  plans_->inverse = fftw_plan_dft_c2r_1d(len, c, re.data(), FFTW_ESTIMATE);
  if (plans_->forward == nullptr || plans_->inverse == nullptr) {
    throw NumericalError("RealFft: FFTW planning failed");
  }
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->inverse) fftw_destroy_plan(plans_->inverse);
}

void RealFft::forward(std::span<double> in, std::span<std::complex<double>> out) const {
  if (in.size() != n_ || out.size() != bins()) throw InvalidParameter("RealFft::forward: size");
  fftw_execute_dft_r2c(plans_->forward, in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<std::complex<double>> in, std::span<double> out) const {
  if (in.size() != bins() || out.size() != n_) throw InvalidParameter("RealFft::inverse: size");
  fftw_execute_dft_c2r(plans_->inverse, reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

}  // namespace neuroloop::dsp
