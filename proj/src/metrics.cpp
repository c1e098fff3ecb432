#include "countica/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace countica {

double cosine_similarity(const VectorXd& v, const VectorXd& w) {
  if (v.size() != w.size())
    throw std::invalid_argument("cosine_similarity: length mismatch");
  const double nv = v.norm();
  const double nw = w.norm();
  if (!(nv > 0.0) || !(nw > 0.0))
    throw std::invalid_argument("cosine_similarity: zero vector");
  return v.dot(w) / (nv * nw);
}

Alignment align_mixing(const MatrixXd& estimate, const MatrixXd& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
    throw std::invalid_argument("align_mixing: shape mismatch");
  const int d = static_cast<int>(estimate.cols());
  if (d > 9)
    throw std::invalid_argument(
        "align_mixing: d > 9 exceeds the exhaustive-search guard; use the "
        "Hungarian fallback flag (reserved)");

  // |cos| between every (estimate, reference) column pair.
  MatrixXd cos_abs(d, d);
  MatrixXd cos_signed(d, d);
  for (int a = 0; a < d; ++a)
    for (int r = 0; r < d; ++r) {
      cos_signed(a, r) = cosine_similarity(estimate.col(a), reference.col(r));
      cos_abs(a, r) = std::abs(cos_signed(a, r));
    }

  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = -1.0;
  do {
    double score = 0.0;
    for (int r = 0; r < d; ++r) score += cos_abs(perm[r], r);
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  Alignment out;
  out.permutation = best;
  out.signs.resize(d);
  out.per_column_cosine.resize(d);
  for (int r = 0; r < d; ++r) {
    out.signs[r] = cos_signed(best[r], r) >= 0.0 ? 1 : -1;
    out.per_column_cosine[r] = cos_abs(best[r], r);
  }
  out.mean_cosine = out.per_column_cosine.mean();
  return out;
}

namespace {

// Exact squared 1-D order-2 Wasserstein between two projected samples.
double w2_squared_1d(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = a[i] - b[i];
      acc += diff * diff;
    }
    return acc / static_cast<double>(a.size());
  }
  // Unequal sizes: quantile coupling on a fixed grid.
  constexpr int kGrid = 1024;
  auto quantile = [](const std::vector<double>& s, double u) {
    // Inverse empirical CDF (left-continuous).
    const std::size_t n = s.size();
    const std::size_t idx =
        std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(u * n) - 1));
    return s[idx];
  };
  double acc = 0.0;
  for (int g = 0; g < kGrid; ++g) {
    const double u = (g + 0.5) / kGrid;
    const double diff = quantile(a, u) - quantile(b, u);
    acc += diff * diff;
  }
  return acc / kGrid;
}

}  // namespace

double sliced_wasserstein(const std::vector<MatrixXd>& dsA,
                          const std::vector<MatrixXd>& dsB, int n_projections,
                          Rng& rng) {
  if (dsA.empty() || dsB.empty())
    throw std::invalid_argument("sliced_wasserstein: empty input");
  if (n_projections < 1)
    throw std::invalid_argument("sliced_wasserstein: n_projections >= 1 required");
  const Eigen::Index dim = dsA[0].size();
  for (const auto& m : dsA)
    if (m.size() != dim) throw std::invalid_argument("sliced_wasserstein: ragged dsA");
  for (const auto& m : dsB)
    if (m.size() != dim) throw std::invalid_argument("sliced_wasserstein: ragged dsB");

  // Flatten trajectories once.
  MatrixXd A(dsA.size(), dim), B(dsB.size(), dim);
  for (std::size_t i = 0; i < dsA.size(); ++i)
    A.row(i) = Eigen::Map<const VectorXd>(dsA[i].data(), dim).transpose();
  for (std::size_t i = 0; i < dsB.size(); ++i)
    B.row(i) = Eigen::Map<const VectorXd>(dsB[i].data(), dim).transpose();

  double acc = 0.0;
  std::vector<double> pa(dsA.size()), pb(dsB.size());
  for (int p = 0; p < n_projections; ++p) {
    VectorXd dir(dim);
    do {
      for (Eigen::Index j = 0; j < dim; ++j) dir[j] = rng.normal();
    } while (!(dir.norm() > 0.0));
    dir /= dir.norm();
    VectorXd projA = A * dir;
    VectorXd projB = B * dir;
    for (std::size_t i = 0; i < pa.size(); ++i) pa[i] = projA[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < pb.size(); ++i) pb[i] = projB[static_cast<Eigen::Index>(i)];
    acc += w2_squared_1d(pa, pb);
  }
  return std::sqrt(acc / n_projections);
}

std::vector<MatrixXd> to_real_trajectories(const Dataset& data) {
  std::vector<MatrixXd> out;
  out.reserve(data.sequences.size());
  for (const Sequence& seq : data.sequences) out.push_back(seq.counts.cast<double>());
  return out;
}

MatrixXd gram_coherence(const MatrixXd& Gamma) {
  return (Gamma.transpose() * Gamma).cwiseAbs();
}

double max_pairwise_coherence(const MatrixXd& Gamma) {
  const MatrixXd g = gram_coherence(Gamma);
  double best = 0.0;
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j)
      if (i != j) best = std::max(best, g(i, j));
  return best;
}

MedoidResult medoid_mixing(const std::vector<MatrixXd>& mixings) {
  const int n = static_cast<int>(mixings.size());
  if (n < 2) throw std::invalid_argument("medoid_mixing: need at least 2 mixings");

  MatrixXd sim(n, n);
  sim.setZero();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) sim(a, b) = align_mixing(mixings[a], mixings[b]).mean_cosine;

  int medoid = 0;
  double best = -1.0;
  for (int a = 0; a < n; ++a) {
    const double mean_sim = sim.row(a).sum() / (n - 1);
    if (mean_sim > best) {
      best = mean_sim;
      medoid = a;
    }
  }

  MedoidResult out;
  out.index = medoid;
  out.aligned.resize(n);
  const MatrixXd& ref = mixings[medoid];
  const int K = static_cast<int>(ref.rows());
  const int d = static_cast<int>(ref.cols());
  for (int a = 0; a < n; ++a) {
    const Alignment al = align_mixing(mixings[a], ref);
    MatrixXd aligned(K, d);
    for (int r = 0; r < d; ++r)
      aligned.col(r) = al.signs[r] * mixings[a].col(al.permutation[r]);
    out.aligned[a] = std::move(aligned);
  }

  out.column_deviation = MatrixXd::Zero(K, d);
  for (int a = 0; a < n; ++a) {
    const MatrixXd diff = out.aligned[a] - ref;
    out.column_deviation += diff.cwiseProduct(diff);
  }
  out.column_deviation = (out.column_deviation / (n - 1)).cwiseSqrt();
  return out;
}

double mae_log1p(const MatrixXd& truth, const MatrixXd& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw std::invalid_argument("mae_log1p: shape mismatch");
  if ((pred.array() < 0.0).any())
    throw std::invalid_argument("mae_log1p: negative prediction");
  return (truth.array().log1p() - pred.array().log1p()).abs().mean();
}

double poisson_deviance(const MatrixXd& truth, const MatrixXd& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw std::invalid_argument("poisson_deviance: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < truth.rows(); ++t)
    for (Eigen::Index k = 0; k < truth.cols(); ++k) {
      const double x = truth(t, k);
      const double xh = pred(t, k);
      if (x == 0.0) continue;  // contribution set to 0 when the count is 0
      if (!(xh > 0.0))
        throw std::invalid_argument("poisson_deviance: zero prediction for a "
                                    "positive count");
      acc += x * std::log(x / xh) - x + xh;
    }
  return 2.0 * acc / static_cast<double>(truth.size());
}

VectorXd clr(const VectorXd& row, double pseudo_count) {
  VectorXd logs = (row.array() + pseudo_count).log();
  return logs.array() - logs.mean();
}

double aitchison_distance(const MatrixXd& truth, const MatrixXd& pred,
                          double pseudo_count) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw std::invalid_argument("aitchison_distance: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < truth.rows(); ++t)
    acc += (clr(truth.row(t).transpose(), pseudo_count) -
            clr(pred.row(t).transpose(), pseudo_count))
               .norm();
  return acc / static_cast<double>(truth.rows());
}

}  // namespace countica
