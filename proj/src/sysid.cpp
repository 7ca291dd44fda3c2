#include "tdsim/sysid.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace tdsim::sysid {

double chirp(const ChirpSpec& spec, double t) {
  if (t < 0) throw ValidationError("chirp: t must be >= 0");
  return spec.C * std::sin(spec.a * t + spec.b * t * t);
}

namespace {

// Instantaneous-frequency samples (t, omega) recovered from the zero
// crossings of a swept sine: each half period between crossings t1, t2 maps
// to omega = pi/(t2 - t1) at the midpoint.
std::vector<std::pair<double, double>> crossing_frequencies(const std::vector<double>& u,
                                                            double dt) {
  std::vector<double> crossings;
  for (std::size_t i = 1; i < u.size(); ++i) {
    // strict sign changes only: stretches of exact zeros must not fabricate
    // crossings (a truncated half period reads as a bogus frequency)
    if ((u[i - 1] < 0 && u[i] > 0) || (u[i - 1] > 0 && u[i] < 0)) {
      const double f = u[i - 1] / (u[i - 1] - u[i]);
      crossings.push_back((static_cast<double>(i - 1) + f) * dt);
    }
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 1; i < crossings.size(); ++i) {
    const double half = crossings[i] - crossings[i - 1];
    if (half <= 0) continue;
    out.emplace_back(0.5 * (crossings[i] + crossings[i - 1]), M_PI / half);
  }
  // keep a monotone subsequence; noise can produce local dips
  std::vector<std::pair<double, double>> mono;
  for (const auto& p : out) {
    if (mono.empty() || p.second >= mono.back().second) mono.push_back(p);
  }
  return mono;
}

double window_center_for(const std::vector<std::pair<double, double>>& inst, double omega) {
  if (inst.size() < 2 || omega < inst.front().second || omega > inst.back().second) {
    std::ostringstream os;
    os << "frequency " << omega << " rad/s outside the swept band";
    if (inst.size() >= 2) os << " [" << inst.front().second << ", " << inst.back().second << "]";
    throw NumericError(os.str());
  }
  auto it = std::lower_bound(inst.begin(), inst.end(), omega,
                             [](const auto& p, double w) { return p.second < w; });
  if (it == inst.begin()) return it->first;
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  if (hi.second == lo.second) return lo.first;
  const double a = (omega - lo.second) / (hi.second - lo.second);
  return (1.0 - a) * lo.first + a * hi.first;
}

struct Demod {
  std::complex<double> value;
  double weight_sum;
};

// Hann-windowed quadrature correlation of one channel after removing a
// least-squares linear trend over the window.
Demod demodulate(const std::vector<double>& x, double dt, std::size_t i0, std::size_t i1,
                 double omega) {
  const std::size_t n = i1 - i0;
  double sw = 0, swt = 0, swtt = 0, swx = 0, swtx = 0;
  std::vector<double> wgt(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / n);
    const double t = static_cast<double>(i0 + i) * dt;
    wgt[i] = w;
    sw += w;
    swt += w * t;
    swtt += w * t * t;
    swx += w * x[i0 + i];
    swtx += w * t * x[i0 + i];
  }
  const double det = sw * swtt - swt * swt;
  double c0 = 0, c1 = 0;
  if (std::abs(det) > 1e-300) {
    c1 = (sw * swtx - swt * swx) / det;
    c0 = (swtt * swx - swt * swtx) / det;
  }
  std::complex<double> acc(0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i0 + i) * dt;
    const double detr = x[i0 + i] - c0 - c1 * t;
    acc += wgt[i] * detr * std::exp(std::complex<double>(0, -omega * t));
  }
  return {acc, sw};
}

}  // namespace

std::pair<double, double> swept_band(const std::vector<double>& u, double dt) {
  if (!(dt > 0)) throw ValidationError("swept_band: dt must be > 0");
  const auto inst = crossing_frequencies(u, dt);
  if (inst.size() < 2) throw NumericError("swept_band: too few zero crossings in the input");
  return {inst.front().second, inst.back().second};
}

FreqResponse estimate_response(const std::vector<double>& u, const std::vector<double>& y,
                               double dt, const std::vector<double>& omega_list) {
  if (u.size() != y.size()) throw ValidationError("estimate_response: u/y length mismatch");
  if (u.size() < 8) throw ValidationError("estimate_response: too few samples");
  if (!(dt > 0)) throw ValidationError("estimate_response: dt must be > 0");

  const auto inst = crossing_frequencies(u, dt);
  const double t_total = static_cast<double>(u.size() - 1) * dt;

  std::vector<double> omegas = omega_list;
  std::sort(omegas.begin(), omegas.end());

  FreqResponse out;
  double prev_phase = 0.0;
  bool first = true;
  for (double omega : omegas) {
    if (!(omega > 0)) throw ValidationError("estimate_response: omega must be > 0");
    const double tc = window_center_for(inst, omega);
    const double len = std::max(4.0 * 2.0 * M_PI / omega, 64.0 * dt);
    double lo = std::max(0.0, tc - 0.5 * len);
    double hi = std::min(t_total, lo + len);
    lo = std::max(0.0, hi - len);
    const std::size_t i0 = static_cast<std::size_t>(std::ceil(lo / dt));
    const std::size_t i1 = std::min(u.size(), static_cast<std::size_t>(std::floor(hi / dt)) + 1);
    if (i1 - i0 < 8) throw NumericError("estimate_response: window too short");

    const Demod du = demodulate(u, dt, i0, i1, omega);
    const Demod dy = demodulate(y, dt, i0, i1, omega);
    if (std::abs(du.value) < 1e-12 * du.weight_sum) {
      std::ostringstream os;
      os << "estimate_response: input energy at " << omega << " rad/s below threshold";
      throw NumericError(os.str());
    }
    const std::complex<double> h = dy.value / du.value;
    double phase = std::arg(h);
    if (!first) {
      while (phase - prev_phase > M_PI) phase -= 2.0 * M_PI;
      while (phase - prev_phase < -M_PI) phase += 2.0 * M_PI;
    }
    first = false;
    prev_phase = phase;
    out.omega.push_back(omega);
    out.gain.push_back(std::abs(h));
    out.phase.push_back(phase);
  }
  return out;
}

TransferModel TransferModel::canonical() const {
  TransferModel out = *this;
  // factor pairs are (T[0],T[1])/(T[2],T[3]) and (T[4],T[5])/(T[6],T[7]);
  // order by denominator resonant frequency 1/sqrt(|T3|), zero-T last
  const double r1 = std::abs(out.T[2]);
  const double r2 = std::abs(out.T[6]);
  const bool swap = (r2 == 0.0 && r1 == 0.0) ? false : (r1 == 0.0 || (r2 != 0.0 && r2 < r1));
  if (swap) {
    std::swap(out.T[0], out.T[4]);
    std::swap(out.T[1], out.T[5]);
    std::swap(out.T[2], out.T[6]);
    std::swap(out.T[3], out.T[7]);
  }
  return out;
}

std::complex<double> eval_W(const TransferModel& m, double omega) {
  if (!(omega > 0)) throw ValidationError("eval_W: omega must be > 0");
  const std::complex<double> s(0.0, omega);
  const std::complex<double> s2 = s * s;
  auto biquad = [&](double a2, double a1) { return a2 * s2 + a1 * s + 1.0; };
  const std::complex<double> den =
      s * biquad(m.T[2], m.T[3]) * biquad(m.T[6], m.T[7]);
  if (std::abs(den) < 1e-300) throw NumericError("eval_W: denominator underflow");
  return m.k * biquad(m.T[0], m.T[1]) * biquad(m.T[4], m.T[5]) / den;
}

namespace {

VecX pack(const TransferModel& m) {
  VecX p(9);
  p[0] = m.k;
  for (int i = 0; i < 8; ++i) p[i + 1] = m.T[i];
  return p;
}

TransferModel unpack(const VecX& p) {
  TransferModel m;
  m.k = p[0];
  for (int i = 0; i < 8; ++i) m.T[i] = p[i + 1];
  return m;
}

// log-gain, cos-phase and sin-phase channels per frequency.
VecX residuals(const FreqResponse& r, const VecX& p) {
  const TransferModel m = unpack(p);
  VecX out(3 * r.omega.size());
  for (std::size_t i = 0; i < r.omega.size(); ++i) {
    const std::complex<double> w = eval_W(m, r.omega[i]);
    const double mag = std::abs(w);
    if (!(r.gain[i] > 0)) throw ValidationError("fit_model: gains must be > 0");
    if (!(mag > 0) || !std::isfinite(mag)) throw NumericError("fit_model: model degenerate");
    const double ph = std::arg(w);
    out[3 * i + 0] = std::log(mag) - std::log(r.gain[i]);
    out[3 * i + 1] = std::cos(ph) - std::cos(r.phase[i]);
    out[3 * i + 2] = std::sin(ph) - std::sin(r.phase[i]);
  }
  return out;
}

}  // namespace

FitResult fit_model(const FreqResponse& resp, const TransferModel& init) {
  if (resp.omega.size() < 9) throw ValidationError("fit_model: need at least 9 frequencies");

  VecX p = pack(init);
  VecX r = residuals(resp, p);
  if (!r.allFinite()) throw NumericError("fit_model: non-finite residual at initial model");
  double cost = r.squaredNorm();

  double lambda = 1e-3;
  FitResult out;
  out.model = init;
  out.residual = cost;

  const long nres = r.size();
  MatX jac(nres, 9);
  for (int iter = 0; iter < 200; ++iter) {
    out.iterations = iter;
    for (int j = 0; j < 9; ++j) {
      const double step = 1e-6 * std::max(std::abs(p[j]), 1.0);
      VecX pj = p;
      pj[j] += step;
      jac.col(j) = (residuals(resp, pj) - r) / step;
    }
    const MatX jtj = jac.transpose() * jac;
    const VecX g = jac.transpose() * r;
    if (g.cwiseAbs().maxCoeff() < 1e-10) break;

    bool accepted = false;
    while (lambda < 1e14) {
      MatX damped = jtj;
      for (int j = 0; j < 9; ++j)
        damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      const VecX delta = damped.ldlt().solve(-g);
      const VecX p_try = p + delta;
      VecX r_try;
      double cost_try = std::numeric_limits<double>::infinity();
      try {
        r_try = residuals(resp, p_try);
        if (r_try.allFinite()) cost_try = r_try.squaredNorm();
      } catch (const NumericError&) {
      }
      if (cost_try < cost) {
        p = p_try;
        r = r_try;
        cost = cost_try;
        lambda = std::max(lambda * 0.1, 1e-14);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
  out.model = unpack(p);
  out.residual = cost;
  return out;
}

}  // namespace tdsim::sysid
