#pragma once

#include <complex>
#include <vector>

#include "tdsim/common.hpp"

namespace tdsim::sysid {

/// Swept-sine excitation C sin(a t + b t^2); instantaneous frequency a + 2bt.
struct ChirpSpec {
  double C = 1.0;
  double a = 0.0;  // rad/s
  double b = 0.0;  // rad/s^2
};

double chirp(const ChirpSpec& spec, double t);

/// Nonparametric gain/phase samples on a sorted frequency grid, phase
/// unwrapped.
struct FreqResponse {
  std::vector<double> omega;
  std::vector<double> gain;
  std::vector<double> phase;
};

/// Gain/phase of y against u at the requested frequencies. u is assumed to be
/// a swept sine; each frequency is demodulated over a Hann window centred
/// where the instantaneous input frequency (recovered from u's zero
/// crossings) matches, with window length max(4 periods, 64 samples). Both
/// channels are linearly detrended inside the window first.
FreqResponse estimate_response(const std::vector<double>& u, const std::vector<double>& y,
                               double dt, const std::vector<double>& omega_list);

/// [lowest, highest] instantaneous frequency swept by u, from zero crossings.
std::pair<double, double> swept_band(const std::vector<double>& u, double dt);

/// W(s) = (k/s) * (T1 s^2 + T2 s + 1)/(T3 s^2 + T4 s + 1)
///              * (T5 s^2 + T6 s + 1)/(T7 s^2 + T8 s + 1).
struct TransferModel {
  double k = 1.0;
  std::array<double, 8> T{};  // T[0] = T1 ... T[7] = T8

  /// Sort the numerator/denominator factor pairs by resonant frequency so
  /// models that differ only by factor order compare equal.
  TransferModel canonical() const;
};

std::complex<double> eval_W(const TransferModel& model, double omega);

struct FitResult {
  TransferModel model;
  double residual = 0.0;  // final sum of squares
  int iterations = 0;
};

/// Levenberg-Marquardt fit of the nine parameters against measured gain and
/// phase: residuals are log|W| - log(gain), cos(arg W) - cos(phase) and
/// sin(arg W) - sin(phase) per frequency. Forward-difference Jacobian,
/// lambda schedule 1e-3 x10/÷10, stop on |grad| < 1e-10 or 200 iterations.
FitResult fit_model(const FreqResponse& resp, const TransferModel& init);

}  // namespace tdsim::sysid
