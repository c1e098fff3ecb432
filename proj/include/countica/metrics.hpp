#pragma once

#include "countica/rng.hpp"
#include "countica/types.hpp"

#include <vector>

namespace countica {

/// <v, w> / (|v| |w|); errors on zero vectors.
double cosine_similarity(const VectorXd& v, const VectorXd& w);

/// Signed column matching between an estimated and a reference mixing.
/// permutation[i] is the estimate column matched to reference column i;
/// signs[i] makes the matched inner product nonnegative.
struct Alignment {
  std::vector<int> permutation;
  std::vector<int> signs;
  VectorXd per_column_cosine;  // in [0, 1]
  double mean_cosine = 0.0;
};

/// Exhaustive search over all signed column permutations, maximizing the sum
/// of absolute inner products. Guarded at d <= 9; larger d should use a
/// Hungarian-assignment fallback (reserved flag, not implemented).
Alignment align_mixing(const MatrixXd& estimate, const MatrixXd& reference);

/// Order-2 sliced Wasserstein distance between two sets of trajectories,
/// each flattened to a T*K point: root of the average over random unit
/// directions of the squared exact 1-D W2. Equal sizes pair sorted samples;
/// unequal sizes couple 1024-point quantile grids.
double sliced_wasserstein(const std::vector<MatrixXd>& dsA,
                          const std::vector<MatrixXd>& dsB, int n_projections,
                          Rng& rng);

std::vector<MatrixXd> to_real_trajectories(const Dataset& data);

/// Elementwise |Gamma^T Gamma|.
MatrixXd gram_coherence(const MatrixXd& Gamma);

/// Largest off-diagonal entry of the absolute Gram matrix (0 when d == 1).
double max_pairwise_coherence(const MatrixXd& Gamma);

/// Medoid of a set of mixings under mean pairwise aligned cosine, the others
/// aligned (columns permuted and sign-flipped) onto it, and the elementwise
/// deviation of the aligned columns around the medoid.
struct MedoidResult {
  int index = 0;
  std::vector<MatrixXd> aligned;
  MatrixXd column_deviation;  // K x d, sqrt of 1/(n-1) sum (col - medoid col)^2
};

MedoidResult medoid_mixing(const std::vector<MatrixXd>& mixings);

/// Trajectory metrics (truth counts vs predicted means).
double mae_log1p(const MatrixXd& truth, const MatrixXd& pred);
double poisson_deviance(const MatrixXd& truth, const MatrixXd& pred);
double aitchison_distance(const MatrixXd& truth, const MatrixXd& pred,
                          double pseudo_count = 0.5);

/// Centered log-ratio of one composition row after adding a pseudo-count.
VectorXd clr(const VectorXd& row, double pseudo_count = 0.5);

struct RecoveryReport {
  Alignment alignment;
  double sliced_wasserstein = 0.0;
  MatrixXd gram_coherence;
  double runtime_seconds = 0.0;
};

}  // namespace countica
