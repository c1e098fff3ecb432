#pragma once

#include "countica/fit.hpp"
#include "countica/forecast.hpp"
#include "countica/metrics.hpp"
#include "countica/types.hpp"

#include <string>
#include <vector>

namespace countica {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Versioned model document. Arrays are nested row-major with axis order
/// (component, regime) for d x C blocks, (component, regime, regime) for the
/// transition stack A (A[i][k][l] = P(next = k | prev = l)) and (feature,
/// component) for Gamma.
void save_model_json(const ModelParams& model, const std::string& path);
ModelParams load_model_json(const std::string& path);
std::string model_to_json_string(const ModelParams& model);
ModelParams model_from_json_string(const std::string& text);

/// Long-format dataset CSV: header `sequence,t,<features...>[,offset]`.
/// Without an offset column, per-row logsum offsets log(sum_k x_k) are
/// computed. Time grids must be rectangular; counts must be nonnegative
/// integers. Parse errors carry the offending row number.
Dataset ingest_dataset(const std::string& path);
void save_dataset_csv(const Dataset& data, const std::string& path);

/// Lenient variant for predicted-mean tables (real-valued entries allowed).
struct RealDataset {
  std::vector<std::string> ids;
  std::vector<MatrixXd> values;
  std::vector<VectorXd> offsets;
};
RealDataset ingest_real_dataset(const std::string& path);

/// Resumable fit checkpoint: model, optimizer state, proxies and ELBO trace.
void save_fit_state(const FitState& state, const std::string& path);
FitState load_fit_state(const std::string& path);

void save_recovery_report(const RecoveryReport& report, std::uint64_t seed,
                          const std::string& config_hash, const std::string& path);

/// Forecast outputs: CSV columns t,feature,predicted_mean plus a JSON sidecar
/// with alpha_hat, mu_hat, psi_hat and the MAP path.
void save_forecast_csv(const Forecast& forecast, int t0, const std::string& path);
void save_forecast_sidecar_json(const Forecast& forecast, int t0,
                                const std::string& path);

/// `metric,value` rows.
void save_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                      const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a 64-bit fingerprint, hex-encoded; reproducible across runs.
std::string content_hash_hex(const std::string& bytes);

}  // namespace countica
