#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "weakpred/errors.hpp"
#include "weakpred/signal.hpp"

using namespace weakpred;

namespace {

const TimeGrid kGauss(-20.0, 0.01, 4000);

SampledSignal gaussian(const TimeGrid& g, double shift = 0.0) {
  return SampledSignal::sample(g, [=](double t) { return std::exp(-(t - shift) * (t - shift)); });
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

std::size_t nearest_bin(const FrequencyGrid& fg, double w) {
  return static_cast<std::size_t>(std::llround(w / fg.d_omega())) + fg.zero_index();
}

}  // namespace

TEST_SUITE("signal_core") {

TEST_CASE("time grid exposes nyquist and rejects bad sampling") {
  const TimeGrid g(-1.0, 0.5, 8);
  CHECK(g.nyquist() == doctest::Approx(2.0 * kPi));
  CHECK(g.t_end() == doctest::Approx(3.0));
  CHECK(g.index_of(0.0).value() == 2);
  CHECK_FALSE(g.index_of(0.25).has_value());
  CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 8), InvalidInput);
  CHECK_THROWS_AS(TimeGrid(0.0, 0.1, 1), InvalidInput);
}

TEST_CASE("forward spectrum of zero is zero") {
  const Spectrum X = forward_spectrum(SampledSignal::zeros(kGauss));
  for (auto v : X.values()) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("forward spectrum of a Gaussian at zero frequency matches quadrature") {
  const double expected = oracle::integrate([](double t) { return std::exp(-t * t); }, -20.0, 20.0);
  const Spectrum X = forward_spectrum(gaussian(kGauss));
  const Complex x0 = X[X.grid().zero_index()];
  CHECK(x0.real() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(x0.imag()) < 1e-14);
  CHECK(x0.real() == doctest::Approx(1.7724539).epsilon(1e-7));
}

TEST_CASE("shift theorem against quadrature") {
  const Spectrum X0 = forward_spectrum(gaussian(kGauss));
  const Spectrum X1 = forward_spectrum(gaussian(kGauss, 1.0));
  const std::size_t m = nearest_bin(X0.grid(), 2.0);
  const double w = X0.omega(m);
  const Complex ref = oracle::fourier([](double t) { return std::exp(-(t - 1) * (t - 1)); }, w, -20.0, 20.0);
  CHECK(std::abs(X1[m] - ref) < 1e-10 * std::abs(ref));
  CHECK(std::abs(X1[m]) == doctest::Approx(std::abs(X0[m])).epsilon(1e-12));
  const double dphase = std::remainder(std::arg(X1[m]) - std::arg(X0[m]) + w, 2.0 * kPi);
  CHECK(std::abs(dphase) < 1e-10);
}

TEST_CASE("forward spectrum rejects non-finite samples") {
  std::vector<double> v(16, 0.0);
  v[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward_spectrum(SampledSignal(TimeGrid(0.0, 0.1, 16), v)), InvalidInput);
}

TEST_CASE("round trip, Hermitian symmetry and Plancherel") {
  for (double shift : {0.0, 1.0, -3.5}) {
    const SampledSignal x = gaussian(kGauss, shift);
    const Spectrum X = forward_spectrum(x);
    const SampledSignal back = inverse_signal(X, kGauss);
    CHECK(rel_l2(back.values(), x.values()) < 1e-10);
    CHECK(X.hermitian_defect() < 1e-10);

    double time_energy = 0.0, freq_energy = 0.0;
    for (double v : x.values()) time_energy += v * v;
    time_energy *= kGauss.dt();
    for (auto c : X.values()) freq_energy += std::norm(c);
    freq_energy *= X.grid().d_omega() / (2.0 * kPi);
    CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-8));
  }
}

TEST_CASE("inverse of the closed-form Gaussian spectrum") {
  const FrequencyGrid fg(kGauss);
  const Spectrum X = Spectrum::sample(fg, [](double w) { return Complex(std::sqrt(kPi) * std::exp(-w * w / 4), 0.0); });
  const SampledSignal x = inverse_signal(X, kGauss);
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(x[j] - std::exp(-kGauss.t(j) * kGauss.t(j))));
  CHECK(worst < 1e-8);
  CHECK(inverse_transform(X, kGauss).imaginary_residue < 1e-8);
}

TEST_CASE("inverse transform rejects mismatched grids and non-Hermitian input") {
  const Spectrum X = forward_spectrum(gaussian(kGauss));
  CHECK_THROWS_AS(inverse_signal(X, TimeGrid(-20.0, 0.02, 2000)), InvalidInput);
  std::vector<Complex> v(X.values().begin(), X.values().end());
  v[X.grid().zero_index() + 3] += Complex(0.0, 1.0);
  CHECK_THROWS(inverse_signal(Spectrum(X.grid(), v), kGauss));
}

TEST_CASE("lr norms") {
  const SampledSignal zero = SampledSignal::zeros(kGauss);
  for (auto r : {NormOrder::L1, NormOrder::L2, NormOrder::Linf}) CHECK(lr_norm(zero, r) == 0.0);

  const TimeGrid g(-1.0, 0.001, 3000);
  const SampledSignal box = SampledSignal::sample(g, [](double t) { return t >= -1e-12 && t < 1.0 - 1e-12 ? 1.0 : 0.0; });
  CHECK(std::abs(lr_norm(box, NormOrder::L2) - 1.0) <= 0.001);
  CHECK(lr_norm(box, NormOrder::Linf) == 1.0);
  CHECK(std::abs(lr_norm(box, NormOrder::L1) - 1.0) <= 0.001);

  const double l2 = std::sqrt(oracle::integrate([](double t) { return std::exp(-2 * t * t); }, -20.0, 20.0));
  CHECK(lr_norm(gaussian(kGauss), NormOrder::L2) == doctest::Approx(l2).epsilon(1e-12));
  CHECK(l2 == doctest::Approx(std::pow(kPi / 2, 0.25)).epsilon(1e-12));
}

TEST_CASE("norm order parsing") {
  CHECK(parse_norm_order("inf") == NormOrder::Linf);
  CHECK(parse_norm_order("2") == NormOrder::L2);
  CHECK(to_string(NormOrder::L1) == "1");
  CHECK_THROWS_AS(parse_norm_order("3"), InvalidInput);
}

TEST_CASE("weighted tail of the Gaussian spectrum") {
  const FrequencyGrid fg(kGauss);
  const Spectrum zero = Spectrum::zeros(fg);
  CHECK(weighted_tail(zero, 2, 1.0, 0.0) == 0.0);

  const Spectrum X = Spectrum::sample(fg, [](double w) { return Complex(std::sqrt(kPi) * std::exp(-w * w / 4), 0.0); });
  const double expected =
      2.0 * oracle::integrate([](double w) { return std::exp(2 * w) * kPi * std::exp(-w * w / 2); }, 0.0, 60.0);
  // exp(2|w|) has a kink at 0, so the rectangle rule is only O(dw^2) there.
  const double dw = fg.d_omega();
  CHECK(weighted_tail(X, 2, 1.0, 0.0) == doctest::Approx(expected).epsilon(dw * dw / 10));
  CHECK(expected == doctest::Approx(113.7).epsilon(1e-3));
  CHECK_THROWS_AS(weighted_tail(X, 2, 1.0, fg.nyquist()), InvalidInput);
}

TEST_CASE("weighted band growth for the t exp(-t) spectrum") {
  const TimeGrid g(-100.0, 0.005, 1 << 16);
  const Spectrum X = Spectrum::sample(FrequencyGrid(g), [](double w) { return 1.0 / ((1.0 + Complex(0, w)) * (1.0 + Complex(0, w))); });
  auto band = [](double lo, double hi) {
    return 2.0 * oracle::integrate([](double w) { return std::exp(2 * w) / std::pow(1 + w * w, 2); }, lo, hi, 1e-6);
  };
  const double lo = log_weighted_band(X, 2, 1.0, 5.0, 10.0);
  const double hi = log_weighted_band(X, 2, 1.0, 5.0, 20.0);
  CHECK(std::exp(hi - lo) > 1e6);
  CHECK(lo == doctest::Approx(std::log(band(5, 10))).epsilon(2e-3));
  CHECK(hi == doctest::Approx(std::log(band(5, 20))).epsilon(2e-3));
}

TEST_CASE("weighted tail is monotone in Omega and T") {
  const Spectrum X = forward_spectrum(gaussian(kGauss, 0.7));
  double prev = std::numeric_limits<double>::infinity();
  for (double Om = 0.0; Om < 20.0; Om += 0.5) {
    const double v = weighted_tail(X, 1, 0.5, Om);
    CHECK(v <= prev);
    prev = v;
  }
  prev = 0.0;
  for (double T = 0.0; T <= 3.0; T += 0.25) {
    const double v = weighted_tail(X, 2, T, 1.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("spectral derivative norms of the Gaussian") {
  // DFT round-off near 1e-17 is multiplied by w^(2k); dt = 0.05 keeps w <= 63.
  const TimeGrid coarse(-20.0, 0.05, 800);
  const Spectrum X = forward_spectrum(gaussian(coarse));
  CHECK(spectral_derivative_norm(Spectrum::zeros(X.grid()), 3) == 0.0);
  const double l2 = lr_norm(gaussian(coarse), NormOrder::L2);
  CHECK(spectral_derivative_norm(X, 0) == doctest::Approx(l2 * l2).epsilon(1e-8));
  CHECK(spectral_derivative_norm(X, 0) == doctest::Approx(std::sqrt(kPi / 2)).epsilon(1e-10));
  // ||-2t exp(-t^2)||^2 = sqrt(pi/2).
  CHECK(spectral_derivative_norm(X, 1) == doctest::Approx(std::sqrt(kPi / 2)).epsilon(1e-10));
  for (int k = 0; k <= 6; ++k) {
    const double ref = oracle::integrate(
        [k](double t) {
          const double d = oracle::hermite(k, t) * std::exp(-t * t);
          return d * d;
        },
        -12.0, 12.0);
    double dfact = 1.0;
    for (int j = 2 * k - 1; j > 1; j -= 2) dfact *= j;
    CHECK(spectral_derivative_norm(X, k) == doctest::Approx(ref).epsilon(1e-6));
    CHECK(ref == doctest::Approx(std::sqrt(kPi / 2) * dfact).epsilon(1e-9));
  }
  CHECK_THROWS_AS(spectral_derivative_norm(X, 41), InvalidInput);
  CHECK_THROWS_AS(spectral_derivative_norm(X, -1), InvalidInput);
}

TEST_CASE("support leakage diagnostic") {
  CHECK(support_leakage(gaussian(kGauss)).ok());
  const SampledSignal wide = SampledSignal::sample(kGauss, [](double t) { return std::exp(-t * t / 100.0); });
  CHECK_FALSE(support_leakage(wide).ok());
}

TEST_CASE("CSV round trips") {
  const SampledSignal x = gaussian(TimeGrid(-1.0, 0.125, 16), 0.3);
  std::stringstream s;
  write_signal_csv(s, x);
  const SampledSignal y = read_signal_csv(s);
  CHECK(y.grid().same_sampling(x.grid()));
  CHECK(y.grid().t_start() == x.grid().t_start());
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(y[j] == x[j]);

  const Spectrum X = forward_spectrum(x);
  std::stringstream t;
  write_spectrum_csv(t, X);
  const Spectrum Y = read_spectrum_csv(t);
  CHECK(Y.grid().n() == X.grid().n());
  CHECK(Y.grid().dt() == doctest::Approx(X.grid().dt()).epsilon(1e-14));
  for (std::size_t m = 0; m < X.size(); ++m) CHECK(Y[m] == X[m]);

  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::isinf(parse_double("inf")));
  CHECK(parse_double(format_double(0.1)) == 0.1);
  std::stringstream bad("t,value\n0,1\n0.5,x\n");
  CHECK_THROWS_AS(read_signal_csv(bad), InvalidInput);
}

}  // TEST_SUITE
