#include "countica/types.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_block(const MatrixXd& m, int d, int C, const char* name) {
  require(m.rows() == d && m.cols() == C,
          std::string(name) + ": expected d x C block");
  require(m.allFinite(), std::string(name) + ": non-finite entry");
}

}  // namespace

void Dims::validate() const {
  require(d >= 1, "dims: d >= 1 required");
  require(K >= d, "dims: K >= d required");
  require(C >= 1, "dims: C >= 1 required");
  require(T >= 1, "dims: T >= 1 required");
}

void RegimePrior::validate(const Dims& dims, double tol) const {
  check_block(pi, dims.d, dims.C, "pi");
  require(static_cast<int>(A.size()) == dims.d, "A: expected d transition matrices");
  require((pi.array() >= 0.0).all(), "pi: negative entry");
  for (int i = 0; i < dims.d; ++i) {
    require(std::abs(pi.row(i).sum() - 1.0) <= tol, "pi: row does not sum to 1");
    const MatrixXd& Ai = A[i];
    require(Ai.rows() == dims.C && Ai.cols() == dims.C, "A: expected C x C matrix");
    require((Ai.array() >= 0.0).all(), "A: negative entry");
    for (int l = 0; l < dims.C; ++l)
      require(std::abs(Ai.col(l).sum() - 1.0) <= tol, "A: column does not sum to 1");
  }
}

void SourceDynamics::validate(const Dims& dims) const {
  check_block(b_bar, dims.d, dims.C, "b_bar");
  check_block(psi_bar, dims.d, dims.C, "psi_bar");
  check_block(B, dims.d, dims.C, "B");
  check_block(b, dims.d, dims.C, "b");
  check_block(psi, dims.d, dims.C, "psi");
  require((psi_bar.array() > 0.0).all(), "psi_bar: must be strictly positive");
  require((psi.array() > 0.0).all(), "psi: must be strictly positive");
}

void Emission::validate(const Dims& dims, double tol) const {
  require(Gamma.rows() == dims.K && Gamma.cols() == dims.d, "Gamma: expected K x d");
  require(Gamma.allFinite(), "Gamma: non-finite entry");
  require(eta.size() == dims.K, "eta: expected length K");
  require(eta.allFinite(), "eta: non-finite entry");
  if (gamma_normalized) {
    for (int j = 0; j < dims.d; ++j)
      require(std::abs(Gamma.col(j).norm() - 1.0) <= tol,
              "Gamma: column not unit-norm while gamma_normalized is set");
  }
}

void ModelParams::validate() const {
  dims.validate();
  prior.validate(dims);
  dynamics.validate(dims);
  emission.validate(dims);
}

void Sequence::validate() const {
  require(counts.rows() >= 1 && counts.cols() >= 1, "sequence: empty counts");
  require((counts.array() >= 0).all(), "sequence: negative count");
  require(offsets.size() == counts.rows(), "sequence: offsets length != T");
  require(offsets.allFinite(), "sequence: non-finite offset");
}

void LatentPath::validate(const Dims& dims) const {
  require(u.rows() == s.rows() && u.cols() == dims.d && s.cols() == dims.d,
          "latent path: inconsistent shapes");
  require((u.array() >= 0).all() && (u.array() < dims.C).all(),
          "latent path: regime label out of range");
}

ModelParams default_init_model(const Dims& dims) {
  dims.validate();
  ModelParams m;
  m.dims = dims;
  m.prior.pi = MatrixXd::Constant(dims.d, dims.C, 1.0 / dims.C);
  m.prior.A.assign(dims.d, MatrixXd::Constant(dims.C, dims.C, 1.0 / dims.C));
  m.dynamics.b_bar = MatrixXd::Zero(dims.d, dims.C);
  m.dynamics.psi_bar = MatrixXd::Ones(dims.d, dims.C);
  m.dynamics.B = MatrixXd::Constant(dims.d, dims.C, 0.5);
  m.dynamics.b = MatrixXd::Zero(dims.d, dims.C);
  m.dynamics.psi = MatrixXd::Ones(dims.d, dims.C);
  m.emission.Gamma = MatrixXd::Zero(dims.K, dims.d);
  m.emission.eta = VectorXd::Zero(dims.K);
  m.emission.gamma_normalized = false;
  return m;
}

}  // namespace countica
