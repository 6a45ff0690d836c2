#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <utility>

#include <Eigen/Core>

#include "qqlab/rng.hpp"

namespace qqlab {

using Amplitude = std::complex<double>;

// Accepted deviation of |C1|^2+|B+|^2+|C4|^2+|B-|^2 from one for user input.
inline constexpr double kConstructionTolerance = 1e-9;

enum class Pol : int { kH = 0, kV = 1 };
enum class Freq : int { kHigh = 0, kLow = 1 };

// Pure ququart in the Bell-type decomposition
//   Psi = (C1 Psi_HH + B+ Psi+ + C4 Psi_VV)(sigma) Psi+(omega)
//         + B- Psi-(sigma) Psi-(omega).
struct QuquartParams {
  Amplitude c1{};
  Amplitude b_plus{};
  Amplitude c4{};
  Amplitude b_minus{};

  double norm_squared() const noexcept {
    return std::norm(c1) + std::norm(b_plus) + std::norm(c4) +
           std::norm(b_minus);
  }
};

// Symmetric polarization part (C1, B+, C4) of a ququart.
struct QutritParams {
  Amplitude c1{};
  Amplitude b_plus{};
  Amplitude c4{};

  double norm_squared() const noexcept {
    return std::norm(c1) + std::norm(b_plus) + std::norm(c4);
  }
};

inline QutritParams qutrit_part(const QuquartParams& q) noexcept {
  return {q.c1, q.b_plus, q.c4};
}

// Two-photon amplitude tensor amp[s1][w1][s2][w2], with H/V and high/low
// frequency mapped to index 0/1.
class PolFreqWaveFunction {
 public:
  using Storage = std::array<Amplitude, 16>;

  static constexpr std::size_t index(Pol s1, Freq w1, Pol s2,
                                     Freq w2) noexcept {
    return static_cast<std::size_t>(s1) * 8 + static_cast<std::size_t>(w1) * 4 +
           static_cast<std::size_t>(s2) * 2 + static_cast<std::size_t>(w2);
  }

  // Single-photon mode index (s, w) -> 2*s + w.
  static constexpr std::size_t mode(Pol s, Freq w) noexcept {
    return static_cast<std::size_t>(s) * 2 + static_cast<std::size_t>(w);
  }

  PolFreqWaveFunction() = default;
  explicit PolFreqWaveFunction(const Storage& amp) : amp_(amp) {}

  Amplitude operator()(Pol s1, Freq w1, Pol s2, Freq w2) const noexcept {
    return amp_[index(s1, w1, s2, w2)];
  }
  Amplitude& operator()(Pol s1, Freq w1, Pol s2, Freq w2) noexcept {
    return amp_[index(s1, w1, s2, w2)];
  }

  const Storage& data() const noexcept { return amp_; }

  // Photon-1 mode as row, photon-2 mode as column.
  Eigen::Matrix4cd as_matrix() const;
  Eigen::Matrix<Amplitude, 16, 1> as_vector() const;

  double norm_squared() const noexcept;
  // Largest |amp[x1,x2] - amp[x2,x1]| over all index pairs.
  double exchange_asymmetry() const noexcept;

 private:
  Storage amp_{};
};

enum class Renormalize { kNo, kYes };

// Validates the amplitudes of a ququart. Throws kZeroState when every
// amplitude vanishes and kNotNormalized when the norm is off by more than
// kConstructionTolerance and renormalization was not requested.
QuquartParams make_ququart(Amplitude c1, Amplitude b_plus, Amplitude c4,
                           Amplitude b_minus,
                           Renormalize renormalize = Renormalize::kNo);

// B+- = (C2 +- C3)/sqrt(2), mapping state-vector coefficients of HV-type
// modes onto the Bell-type amplitudes.
std::pair<Amplitude, Amplitude> b_from_c(Amplitude c2, Amplitude c3) noexcept;
std::pair<Amplitude, Amplitude> c_from_b(Amplitude b_plus,
                                         Amplitude b_minus) noexcept;

PolFreqWaveFunction wave_function(const QuquartParams& q) noexcept;

// Amplitudes seen with both polarizer frames turned by alpha (radians).
// B- is unchanged since Psi-(sigma) is rotation invariant.
QuquartParams rotate_frame(const QuquartParams& q, double alpha) noexcept;

// K = 1 / sum s_i^4 over the singular values of the 4x4 photon-1/photon-2
// amplitude matrix. K > 1 iff the state is entangled.
double pure_schmidt_number(const PolFreqWaveFunction& psi);

// Multiplies all amplitudes by one unit phase so that the first nonzero of
// B+, C1, C4, B- (in that order) becomes real and non-negative. Amplitudes
// with modulus <= zero_tolerance count as zero.
QuquartParams canonicalize(const QuquartParams& q,
                           double zero_tolerance = 1e-14) noexcept;

// Haar-random pure ququart (uniform on the unit sphere of C^4).
QuquartParams random_ququart(Rng& rng);

}  // namespace qqlab
