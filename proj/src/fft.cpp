#include "fft.hpp"

#include <fftw3.h>

#include <memory>
#include <mutex>

namespace weakpred::detail {
namespace {

// The FFTW planner is not reentrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace

std::vector<std::complex<double>> dft(std::span<const std::complex<double>> in,
                                      FftDirection direction) {
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  std::vector<std::complex<double>> out(in.size());
  if (in.empty()) return out;
  auto* src = reinterpret_cast<fftw_complex*>(buf.data());
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  const int sign = direction == FftDirection::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_1d(static_cast<int>(in.size()), src, dst, sign, FFTW_ESTIMATE));
  }
  fftw_execute(plan.get());
  return out;
}

}  // namespace weakpred::detail
