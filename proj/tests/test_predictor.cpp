#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "oracles.hpp"
#include "weakpred/errors.hpp"
#include "weakpred/predictor.hpp"

using namespace weakpred;

namespace {

const TimeGrid kRef(-40.0, 0.005, 16000);

}  // namespace

TEST_SUITE("predictor") {

TEST_CASE("eval_h at fixed points") {
  CHECK(std::abs(eval_h(5.0, 1.0, 0.0)) == 0.0);
  const Complex p(0.0, 4.0);
  const Complex direct = -2.0 * 0.5 * p * p / (3.0 + p);
  const Complex h = eval_h(3.0, 0.5, 4.0);
  CHECK(std::abs(h - direct) < 1e-15);
  CHECK(h.real() == doctest::Approx(1.92).epsilon(1e-14));
  CHECK(h.imag() == doctest::Approx(-2.56).epsilon(1e-14));
  CHECK(std::norm(h) == doctest::Approx(10.24).epsilon(1e-14));
  CHECK(std::norm(h) == doctest::Approx(4.0 * 0.25 * 256.0 / 25.0).epsilon(1e-14));
  CHECK_THROWS_AS(eval_h(0.0, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(eval_h(1.0, -1.0, 1.0), InvalidInput);
}

TEST_CASE("eval_V magnitude and log companion") {
  const TransferValue v0 = eval_V(2.0, 1.0, 0.0);
  CHECK(v0.value == Complex(1.0, 0.0));
  const TransferValue v = eval_V(3.0, 0.5, 4.0);
  CHECK(std::abs(v.value) == doctest::Approx(std::exp(1.92)).epsilon(1e-14));
  CHECK(std::abs(v.value) == doctest::Approx(6.8210).epsilon(1e-4));
  CHECK(v.log_magnitude == doctest::Approx(1.92).epsilon(1e-14));
  const TransferValue peak = eval_V(2.0, 1.0, 2.0);
  CHECK(std::abs(peak.value) == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  // Beyond double range the log companion stays exact.
  const TransferValue huge = eval_V(1000.0, 10.0, 1000.0);
  CHECK(huge.log_magnitude == doctest::Approx(10000.0).epsilon(1e-14));
}

TEST_CASE("|V - 1| decreases to zero as gamma grows") {
  for (double w : {0.5, 3.0, 20.0}) {
    double prev = std::numeric_limits<double>::infinity();
    bool monotone_tail = true;
    for (int e = 1; e <= 6; ++e) {
      const double d = std::abs(eval_V(std::pow(10.0, e), 1.0, w).value - 1.0);
      if (e >= 3) monotone_tail = monotone_tail && d < prev;
      prev = d;
    }
    CHECK(monotone_tail);
    CHECK(prev < 1e-4 * std::max(1.0, w * w / 10));
  }
  CHECK(std::abs(eval_V(1e6, 1.0, 3.0).value - 1.0) < 1e-4);
}

TEST_CASE("kernel spectra against closed forms") {
  const double dt = 0.001;
  const FrequencyGrid fg(dt, 2000);  // d_omega = pi
  const HorizonKernel box = HorizonKernel::boxcar(1.0, dt);
  const Spectrum K = kernel_spectrum(box, fg);
  CHECK(K[fg.zero_index()].real() == doctest::Approx(1.0).epsilon(1e-15));
  const Complex at_pi = K[fg.zero_index() + 1];
  const Complex exact = (std::exp(Complex(0.0, kPi)) - 1.0) / Complex(0.0, kPi);
  CHECK(std::abs(at_pi - exact) < 1e-6);
  CHECK(std::abs(at_pi) == doctest::Approx(2.0 / kPi).epsilon(1e-6));

  const HorizonKernel ramp = HorizonKernel::from_function(1.0, dt, [](double t) { return -t; });
  CHECK(kernel_spectrum(ramp, fg)[fg.zero_index()].real() == doctest::Approx(0.5).epsilon(1e-14));

  const HorizonKernel tent = HorizonKernel::triangular(1.0, dt);
  const Spectrum tent_spectrum = kernel_spectrum(tent, fg);
  for (auto c : tent_spectrum.values()) CHECK(std::abs(c) <= tent.T() * tent.sup_bound() * (1 + 1e-12));
  CHECK_THROWS_AS(kernel_spectrum(box, FrequencyGrid(dt / 2, 4000)), InvalidInput);
}

TEST_CASE("direct-sum kernel spectrum agrees with quadrature on a coarser grid") {
  const HorizonKernel tent = HorizonKernel::triangular(1.0, 0.001);
  const FrequencyGrid fg(0.004, 1024);
  const Spectrum K = kernel_spectrum(tent, fg);
  for (std::size_t m : {fg.zero_index(), fg.zero_index() + 7, fg.zero_index() - 40}) {
    const Complex ref = oracle::fourier([](double t) { return 1.0 - std::abs(2.0 * t + 1.0); }, fg.omega(m), -1.0, 0.0);
    CHECK(std::abs(K[m] - ref) < 1e-6);
  }
}

TEST_CASE("horizon kernel validation") {
  CHECK_THROWS_AS(HorizonKernel::boxcar(1.0, 0.3), InvalidInput);
  CHECK_THROWS_AS(HorizonKernel::boxcar(-1.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(HorizonKernel(1.0, 0.5, {1.0, 2.0}), InvalidInput);
  const HorizonKernel k = HorizonKernel::triangular(1.0, 0.25);
  CHECK(k.taps() == 5);
  CHECK(k.samples()[2] == doctest::Approx(1.0));
  CHECK(k.samples()[0] == doctest::Approx(0.0));
  CHECK(k.weight(0) == doctest::Approx(0.125));
  CHECK(k.weight(1) == doctest::Approx(0.25));
}

TEST_CASE("synthesis of a zero kernel") {
  const HorizonKernel zero = HorizonKernel::from_function(1.0, kRef.dt(), [](double) { return 0.0; });
  const PredictorSpec spec = synthesize(zero, 10.0, kRef);
  const SampledSignal k = spec.k_hat();
  for (double v : k.values()) CHECK(v == 0.0);
  CHECK(spec.K_hat().max_log_magnitude() == -std::numeric_limits<double>::infinity());
}

TEST_CASE("boxcar predictor is causal at gamma 100") {
  const PredictorSpec spec = synthesize(HorizonKernel::boxcar(1.0, kRef.dt()), 100.0, kRef);
  CHECK(spec.negative_time_energy_fraction() < 1e-6);
  CHECK(spec.zeroing_applied());
  const SampledSignal k = spec.k_hat();
  const std::size_t j0 = kRef.index_of(0.0).value();
  for (std::size_t j = 0; j < j0; ++j) REQUIRE(k[j] == 0.0);
}

TEST_CASE("negative-time energy before zeroing") {
  SynthesisOptions opts;
  opts.enforce_decay = false;
  for (double gamma : {1.0, 10.0, 100.0})
    for (const HorizonKernel& k : {HorizonKernel::boxcar(1.0, kRef.dt()), HorizonKernel::triangular(1.0, kRef.dt())}) {
      CAPTURE(gamma);
      CHECK(synthesize(k, gamma, kRef, opts).negative_time_energy_fraction() < 1e-6);
    }
  // Without the band-edge roll-off, Gibbs ringing of the shifted kernel copy leaks past t = 0.
  opts.nyquist_taper = 0.0;
  CHECK(synthesize(HorizonKernel::triangular(1.0, kRef.dt()), 100.0, kRef, opts).negative_time_energy_fraction() > 1e-6);
}

TEST_CASE("K_hat approaches K on a fixed band as gamma grows") {
  const HorizonKernel box = HorizonKernel::boxcar(1.0, kRef.dt());
  const FrequencyGrid fg(kRef);
  const Spectrum K = kernel_spectrum(box, fg);
  double prev = std::numeric_limits<double>::infinity();
  for (double gamma : {1e2, 1e3, 1e4}) {
    const Spectrum Kh = predictor_log_spectrum(K, gamma, box.T()).to_spectrum();
    double worst = 0.0;
    for (std::size_t m = 0; m < fg.n(); ++m)
      if (std::abs(fg.omega(m)) <= 5.0) worst = std::max(worst, std::abs(Kh[m] - K[m]));
    CHECK(worst < prev);
    prev = worst;
  }
  // |h| <= 2 T Omega^2 / gamma = 5e-3 on the band; |e^h - 1| <= e|h|.
  CHECK(prev <= std::exp(1.0) * 5e-3 * box.T());
}

TEST_CASE("amplification bound |K_hat - K| <= 2 exp(T|w|) |K|") {
  for (double gamma : {0.5, 3.0, 50.0}) {
    const HorizonKernel tent = HorizonKernel::triangular(0.5, 0.01);
    const FrequencyGrid fg(0.01, 2048);
    const Spectrum K = kernel_spectrum(tent, fg);
    const LogSpectrum Kh = predictor_log_spectrum(K, gamma, tent.T());
    for (std::size_t m = 0; m < fg.n(); ++m) {
      const Complex kh = std::polar(std::exp(Kh.log_magnitude()[m]), Kh.phase()[m]);
      CHECK(std::abs(kh - K[m]) <= 2.0 * std::exp(tent.T() * std::abs(fg.omega(m))) * std::abs(K[m]) * (1 + 1e-12));
    }
  }
}

TEST_CASE("log spectrum rejects materialization beyond double range") {
  const FrequencyGrid fg(0.01, 8);
  std::vector<double> lm(8, 0.0), ph(8, 0.0);
  lm[5] = 800.0;
  const LogSpectrum big(fg, lm, ph);
  CHECK_THROWS_AS(big.to_spectrum(), NumericalRejection);
  try {
    (void)big.to_spectrum();
  } catch (const NumericalRejection& e) {
    CHECK(std::string(e.what()).find("bin") != std::string::npos);
  }
  CHECK(std::abs(big.scaled_down(800.0)[5] - 1.0) < 1e-15);
}

TEST_CASE("gamma_for_band rule") {
  CHECK(gamma_for_band(0.1, 10.0, 1.0) == doctest::Approx(200.0 / (0.1 / std::exp(1.0))).epsilon(1e-14));
  CHECK(gamma_for_band(0.1, 10.0, 1.0) == doctest::Approx(5436.56).epsilon(1e-6));
  CHECK(gamma_for_band(0.5, 1.0, 1.0) == doctest::Approx(10.873).epsilon(1e-4));
  CHECK(gamma_for_band(0.5, 1e-9, 1.0) == kMinGamma);
  CHECK(band_margin(0.5) == doctest::Approx(0.5 / std::exp(1.0)));
  CHECK_THROWS_AS(gamma_for_band(1.0, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(gamma_for_band(0.0, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(gamma_for_band(0.5, 0.0, 1.0), InvalidInput);

  for (auto [eps, Om] : {std::pair{0.1, 10.0}, std::pair{0.5, 1.0}}) {
    const double gamma = gamma_for_band(eps, Om, 1.0);
    double worst = 0.0;
    for (int j = 0; j < 10000; ++j) worst = std::max(worst, std::abs(eval_V(gamma, 1.0, -Om + 2 * Om * j / 9999.0).value - 1.0));
    CHECK(worst <= eps);
  }
}

TEST_CASE("identity predictor reproduces the kernel spectrum") {
  const TimeGrid g(-10.0, 0.01, 2000);
  const HorizonKernel box = HorizonKernel::boxcar(1.0, g.dt());
  const PredictorSpec id = identity_predictor(box, g);
  const Spectrum K = kernel_spectrum(box, FrequencyGrid(g));
  const Spectrum Kh = id.K_hat().to_spectrum();
  for (std::size_t m = 0; m < K.size(); ++m) CHECK(std::abs(Kh[m] - K[m]) <= 1e-14 * (1 + std::abs(K[m])));
  CHECK(std::isinf(id.gamma()));
}

TEST_CASE("synthesis requires the grid to straddle t = 0") {
  CHECK_THROWS_AS(synthesize(HorizonKernel::boxcar(1.0, 0.01), 10.0, TimeGrid(1.0, 0.01, 1000)), InvalidInput);
}

TEST_CASE("predictor files") {
  const auto dir = std::filesystem::temp_directory_path() / "weakpred_predictor_files";
  std::filesystem::remove_all(dir);
  const TimeGrid g(-20.0, 0.01, 4000);
  const PredictorSpec spec = synthesize(HorizonKernel::boxcar(1.0, g.dt()), 5.0, g);
  const auto paths = write_predictor(spec, dir, "p");
  REQUIRE(paths.size() == 3);
  for (const auto& p : paths) CHECK(std::filesystem::file_size(p) > 0);
  std::ifstream meta(dir / "p_meta.txt");
  std::string text((std::istreambuf_iterator<char>(meta)), std::istreambuf_iterator<char>());
  CHECK(text.find("gamma=5") != std::string::npos);
  CHECK(text.find("negative_time_energy_fraction=") != std::string::npos);
  CHECK(text.find("causal_zeroing=true") != std::string::npos);
  std::ifstream kernel(dir / "p_kernel.csv");
  const SampledSignal k = read_signal_csv(kernel);
  CHECK(k.size() == g.n());
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
