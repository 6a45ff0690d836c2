#include "qqlab/state.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>
#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include "qqlab/error.hpp"

namespace qqlab {
namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

bool finite(Amplitude z) noexcept {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

}  // namespace

Eigen::Matrix4cd PolFreqWaveFunction::as_matrix() const {
  Eigen::Matrix4cd m;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          amp_[r * 4 + c];
    }
  }
  return m;
}

Eigen::Matrix<Amplitude, 16, 1> PolFreqWaveFunction::as_vector() const {
  Eigen::Matrix<Amplitude, 16, 1> v;
  for (std::size_t i = 0; i < 16; ++i) v(static_cast<Eigen::Index>(i)) = amp_[i];
  return v;
}

double PolFreqWaveFunction::norm_squared() const noexcept {
  double sum = 0.0;
  for (const auto& a : amp_) sum += std::norm(a);
  return sum;
}

double PolFreqWaveFunction::exchange_asymmetry() const noexcept {
  double worst = 0.0;
  for (std::size_t x1 = 0; x1 < 4; ++x1) {
    for (std::size_t x2 = 0; x2 < 4; ++x2) {
      worst = std::max(worst, std::abs(amp_[x1 * 4 + x2] - amp_[x2 * 4 + x1]));
    }
  }
  return worst;
}

QuquartParams make_ququart(Amplitude c1, Amplitude b_plus, Amplitude c4,
                           Amplitude b_minus, Renormalize renormalize) {
  if (!finite(c1) || !finite(b_plus) || !finite(c4) || !finite(b_minus)) {
    throw Error(ErrorCode::kNotNormalized, "amplitudes must be finite");
  }
  QuquartParams q{c1, b_plus, c4, b_minus};
  const double n2 = q.norm_squared();
  if (n2 == 0.0) {
    throw Error(ErrorCode::kZeroState, "all four amplitudes are zero");
  }
  if (std::abs(n2 - 1.0) <= kConstructionTolerance) return q;
  if (renormalize == Renormalize::kNo) {
    throw Error(ErrorCode::kNotNormalized,
                fmt::format("|C1|^2+|B+|^2+|C4|^2+|B-|^2 = {:.17g}", n2));
  }
  const double scale = 1.0 / std::sqrt(n2);
  q.c1 *= scale;
  q.b_plus *= scale;
  q.c4 *= scale;
  q.b_minus *= scale;
  return q;
}

std::pair<Amplitude, Amplitude> b_from_c(Amplitude c2, Amplitude c3) noexcept {
  return {(c2 + c3) * kInvSqrt2, (c2 - c3) * kInvSqrt2};
}

std::pair<Amplitude, Amplitude> c_from_b(Amplitude b_plus,
                                         Amplitude b_minus) noexcept {
  return {(b_plus + b_minus) * kInvSqrt2, (b_plus - b_minus) * kInvSqrt2};
}

PolFreqWaveFunction wave_function(const QuquartParams& q) noexcept {
  // Polarization factors on the product basis (s1, s2).
  Amplitude qutrit[2][2];
  qutrit[0][0] = q.c1;
  qutrit[0][1] = q.b_plus * kInvSqrt2;
  qutrit[1][0] = q.b_plus * kInvSqrt2;
  qutrit[1][1] = q.c4;
  const double pol_minus[2][2] = {{0.0, kInvSqrt2}, {-kInvSqrt2, 0.0}};
  const double freq_plus[2][2] = {{0.0, kInvSqrt2}, {kInvSqrt2, 0.0}};
  const double freq_minus[2][2] = {{0.0, kInvSqrt2}, {-kInvSqrt2, 0.0}};

  PolFreqWaveFunction psi;
  for (int s1 = 0; s1 < 2; ++s1) {
    for (int w1 = 0; w1 < 2; ++w1) {
      for (int s2 = 0; s2 < 2; ++s2) {
        for (int w2 = 0; w2 < 2; ++w2) {
          psi(Pol(s1), Freq(w1), Pol(s2), Freq(w2)) =
              qutrit[s1][s2] * freq_plus[w1][w2] +
              q.b_minus * (pol_minus[s1][s2] * freq_minus[w1][w2]);
        }
      }
    }
  }
  return psi;
}

QuquartParams rotate_frame(const QuquartParams& q, double alpha) noexcept {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  const double root2cs = std::numbers::sqrt2 * c * s;
  QuquartParams r;
  r.c1 = c * c * q.c1 + root2cs * q.b_plus + s * s * q.c4;
  r.b_plus = -root2cs * (q.c1 - q.c4) + std::cos(2.0 * alpha) * q.b_plus;
  r.c4 = s * s * q.c1 - root2cs * q.b_plus + c * c * q.c4;
  r.b_minus = q.b_minus;
  return r;
}

double pure_schmidt_number(const PolFreqWaveFunction& psi) {
  const Eigen::JacobiSVD<Eigen::Matrix4cd> svd(psi.as_matrix());
  const Eigen::Vector4d sv = svd.singularValues();
  if (!sv.allFinite()) {
    throw Error(ErrorCode::kNumericalFailure, "SVD produced non-finite values");
  }
  const double sum4 = sv.array().pow(4).sum();
  if (!(sum4 > 0.0)) {
    throw Error(ErrorCode::kNumericalFailure, "zero wave function");
  }
  return 1.0 / sum4;
}

QuquartParams canonicalize(const QuquartParams& q,
                           double zero_tolerance) noexcept {
  const Amplitude* order[] = {&q.b_plus, &q.c1, &q.c4, &q.b_minus};
  for (const Amplitude* a : order) {
    if (std::abs(*a) > zero_tolerance) {
      const Amplitude unit = std::conj(*a) / std::abs(*a);
      QuquartParams r{q.c1 * unit, q.b_plus * unit, q.c4 * unit,
                      q.b_minus * unit};
      // Exact real value for the reference amplitude.
      if (a == &q.b_plus) r.b_plus = std::abs(q.b_plus);
      if (a == &q.c1) r.c1 = std::abs(q.c1);
      if (a == &q.c4) r.c4 = std::abs(q.c4);
      if (a == &q.b_minus) r.b_minus = std::abs(q.b_minus);
      return r;
    }
  }
  return q;
}

QuquartParams random_ququart(Rng& rng) {
  boost::random::normal_distribution<double> normal;
  for (;;) {
    QuquartParams q{{normal(rng), normal(rng)},
                    {normal(rng), normal(rng)},
                    {normal(rng), normal(rng)},
                    {normal(rng), normal(rng)}};
    const double n2 = q.norm_squared();
    if (n2 < 1e-12) continue;
    return make_ququart(q.c1, q.b_plus, q.c4, q.b_minus, Renormalize::kYes);
  }
}

}  // namespace qqlab
