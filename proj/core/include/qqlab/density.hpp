#pragma once

#include <utility>

#include <Eigen/Core>

#include "qqlab/state.hpp"

namespace qqlab {

using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using Matrix16 = Eigen::Matrix<Amplitude, 16, 16>;

// Rows/columns indexed like PolFreqWaveFunction::index(s1, w1, s2, w2).
struct DensityMatrix16 {
  Matrix16 entries = Matrix16::Zero();
};

// Frequency-averaged polarization state in the ordered basis
// {Psi_HH, Psi+, Psi_VV, Psi-}.
struct MPSDensity {
  Matrix4 entries = Matrix4::Zero();
};

// One-photon polarization state in the basis {H, V}.
struct ReducedDensity2 {
  Matrix2 entries = Matrix2::Zero();
};

struct StokesVector {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  double norm() const noexcept;
};

enum class Photon { kFirst, kSecond };

// Columns are Psi_HH, Psi+, Psi_VV, Psi- expanded on the product basis
// {HH, HV, VH, VV} (photon 1 first).
const Matrix4& bell_basis() noexcept;

DensityMatrix16 full_density(const PolFreqWaveFunction& psi);

// Partial trace over both photon frequencies. Throws kNotTraceOne when the
// input trace is off by more than 1e-9.
MPSDensity trace_out_frequency(const DensityMatrix16& rho);

// Block form built directly from the amplitudes: Psi3 Psi3^dagger in the
// upper 3x3 block and |B-|^2 in the last diagonal entry.
MPSDensity mps_density(const QuquartParams& q) noexcept;

Matrix4 to_product_basis(const MPSDensity& rho) noexcept;
MPSDensity from_product_basis(const Matrix4& rho_product) noexcept;

ReducedDensity2 reduce_one_photon(const MPSDensity& rho,
                                  Photon traced = Photon::kSecond) noexcept;

// Polarization state of one photon taken straight from the 16x16 matrix
// (its own frequency and the whole partner photon traced out).
ReducedDensity2 one_photon_polarization(const DensityMatrix16& rho,
                                        Photon kept = Photon::kFirst) noexcept;

// Stokes convention: s3 = rho_HH - rho_VV, s1 = 2 Re rho_HV,
// s2 = -2 Im rho_HV. The degree of polarization is |S|.
std::pair<StokesVector, double> stokes_and_polarization(
    const ReducedDensity2& rho) noexcept;

// Closed-form eigenvalues of a 2x2 Hermitian matrix, ascending.
Eigen::Vector2d eigenvalues_2x2(const Matrix2& m) noexcept;

// Ascending eigenvalues of a Hermitian matrix of any size.
Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& m);

// S = -sum lambda log2 lambda in bits. Throws kNotPSD if an eigenvalue is
// below -1e-8; eigenvalues in [-1e-8, 0) are treated as zero.
double von_neumann_entropy(const Eigen::MatrixXcd& rho);
double von_neumann_entropy(const ReducedDensity2& rho);
double von_neumann_entropy(const MPSDensity& rho);
double von_neumann_entropy(const DensityMatrix16& rho);

double entropy_of_spectrum(const Eigen::VectorXd& eigenvalues);

// Tr(rho^2).
double purity(const Eigen::MatrixXcd& rho);

}  // namespace qqlab
