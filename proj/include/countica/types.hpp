#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace countica {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Problem sizes: K observed features, d latent components, C regimes, T time steps.
struct Dims {
  int K = 0;
  int d = 0;
  int C = 0;
  int T = 0;

  void validate() const;  // K >= d >= 1, C >= 1, T >= 1
};

/// Per-component regime chain prior. pi(i, k) is the initial probability of
/// regime k for component i. A[i](k, l) = P(u_{t+1} = k | u_t = l): every
/// column of A[i] sums to one.
struct RegimePrior {
  MatrixXd pi;                 // d x C
  std::vector<MatrixXd> A;     // d matrices, each C x C

  void validate(const Dims& dims, double tol = 1e-12) const;
};

/// Regime-conditioned AR(1) source dynamics. All blocks are d x C with rows
/// indexed by component and columns by regime.
struct SourceDynamics {
  MatrixXd b_bar;    // initial means
  MatrixXd psi_bar;  // initial variances, > 0
  MatrixXd B;        // AR coefficients
  MatrixXd b;        // AR biases
  MatrixXd psi;      // AR noise variances, > 0

  void validate(const Dims& dims) const;
};

/// Linear mixing into log-intensities plus per-feature fixed effects.
struct Emission {
  MatrixXd Gamma;           // K x d
  VectorXd eta;             // K
  bool gamma_normalized = false;

  void validate(const Dims& dims, double tol = 1e-10) const;
};

struct ModelParams {
  Dims dims;
  RegimePrior prior;
  SourceDynamics dynamics;
  Emission emission;

  void validate() const;
};

/// One observed trajectory: counts (T x K) with a known per-time offset.
struct Sequence {
  MatrixXi counts;   // T x K, >= 0
  VectorXd offsets;  // T, finite
  std::string id;

  int T() const { return static_cast<int>(counts.rows()); }
  int K() const { return static_cast<int>(counts.cols()); }
  void validate() const;
};

struct Dataset {
  std::vector<Sequence> sequences;

  int size() const { return static_cast<int>(sequences.size()); }
};

/// Ground-truth latents retained by the simulator.
struct LatentPath {
  MatrixXi u;  // T x d regime labels in [0, C)
  MatrixXd s;  // T x d source values

  void validate(const Dims& dims) const;
};

/// Uniform regime prior, unit variances, zero means; B = 0.5 everywhere.
ModelParams default_init_model(const Dims& dims);

}  // namespace countica
