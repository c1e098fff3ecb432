#include "countica/io.hpp"

#include "json.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace countica {

using nlohmann::json;

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  if (rows == 0) return MatrixXd(0, 0);
  const std::size_t cols = j.at(0).size();
  MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) throw std::invalid_argument("json: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

VectorXd vector_from_json(const json& j) {
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << content;
}

std::string content_hash_hex(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string model_to_json_string(const ModelParams& model) {
  json j;
  j["format"] = "countica-model";
  j["version"] = 1;
  j["dims"] = {{"K", model.dims.K}, {"d", model.dims.d}, {"C", model.dims.C},
               {"T", model.dims.T}};
  j["gamma_normalized"] = model.emission.gamma_normalized;
  j["pi"] = matrix_to_json(model.prior.pi);
  json A = json::array();
  for (const MatrixXd& Ai : model.prior.A) A.push_back(matrix_to_json(Ai));
  j["A"] = std::move(A);
  j["b_bar"] = matrix_to_json(model.dynamics.b_bar);
  j["psi_bar"] = matrix_to_json(model.dynamics.psi_bar);
  j["B"] = matrix_to_json(model.dynamics.B);
  j["b"] = matrix_to_json(model.dynamics.b);
  j["psi"] = matrix_to_json(model.dynamics.psi);
  j["Gamma"] = matrix_to_json(model.emission.Gamma);
  j["eta"] = vector_to_json(model.emission.eta);
  return j.dump(2);
}

ModelParams model_from_json_string(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != "countica-model")
    throw std::invalid_argument("model json: unknown format field");
  ModelParams m;
  m.dims.K = j.at("dims").at("K").get<int>();
  m.dims.d = j.at("dims").at("d").get<int>();
  m.dims.C = j.at("dims").at("C").get<int>();
  m.dims.T = j.at("dims").at("T").get<int>();
  m.prior.pi = matrix_from_json(j.at("pi"));
  for (const json& Ai : j.at("A")) m.prior.A.push_back(matrix_from_json(Ai));
  m.dynamics.b_bar = matrix_from_json(j.at("b_bar"));
  m.dynamics.psi_bar = matrix_from_json(j.at("psi_bar"));
  m.dynamics.B = matrix_from_json(j.at("B"));
  m.dynamics.b = matrix_from_json(j.at("b"));
  m.dynamics.psi = matrix_from_json(j.at("psi"));
  m.emission.Gamma = matrix_from_json(j.at("Gamma"));
  m.emission.eta = vector_from_json(j.at("eta"));
  m.emission.gamma_normalized = j.value("gamma_normalized", false);
  m.validate();
  return m;
}

void save_model_json(const ModelParams& model, const std::string& path) {
  write_text_file(path, model_to_json_string(model));
}

ModelParams load_model_json(const std::string& path) {
  return model_from_json_string(read_text_file(path));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, long row, const std::string& msg) {
  throw std::invalid_argument(path + ": row " + std::to_string(row) + ": " + msg);
}

struct RawTable {
  bool has_offset = false;
  int K = 0;
  // Per sequence, in first-appearance order.
  std::vector<std::string> ids;
  std::vector<std::vector<double>> t_values;       // per sequence
  std::vector<std::vector<VectorXd>> rows;         // feature values
  std::vector<std::vector<double>> offsets;        // explicit offsets
};

RawTable read_table(const std::string& path, bool integer_counts) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument(path + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "sequence" || header[1] != "t")
    throw std::invalid_argument(path + ": header must start with sequence,t");
  RawTable tab;
  tab.has_offset = header.back() == "offset";
  tab.K = static_cast<int>(header.size()) - 2 - (tab.has_offset ? 1 : 0);
  if (tab.K < 1) throw std::invalid_argument(path + ": no feature columns");

  std::map<std::string, std::size_t> index;
  long row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != 2 + tab.K + (tab.has_offset ? 1 : 0))
      parse_fail(path, row_no, "wrong number of columns");
    const std::string& id = cells[0];
    std::size_t s;
    if (auto it = index.find(id); it != index.end()) {
      s = it->second;
    } else {
      s = tab.ids.size();
      index[id] = s;
      tab.ids.push_back(id);
      tab.t_values.emplace_back();
      tab.rows.emplace_back();
      tab.offsets.emplace_back();
    }
    try {
      tab.t_values[s].push_back(std::stod(cells[1]));
      VectorXd vals(tab.K);
      for (int k = 0; k < tab.K; ++k) {
        const double v = std::stod(cells[2 + k]);
        if (integer_counts) {
          if (v < 0.0) parse_fail(path, row_no, "negative count");
          if (v != std::floor(v)) parse_fail(path, row_no, "non-integer count");
        }
        vals[k] = v;
      }
      tab.rows[s].push_back(std::move(vals));
      if (tab.has_offset) tab.offsets[s].push_back(std::stod(cells[2 + tab.K]));
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      parse_fail(path, row_no, "malformed numeric cell");
    }
  }
  if (tab.ids.empty()) throw std::invalid_argument(path + ": no data rows");

  const std::size_t T = tab.rows[0].size();
  for (std::size_t s = 0; s < tab.ids.size(); ++s) {
    if (tab.rows[s].size() != T)
      throw std::invalid_argument(path + ": ragged sequences (sequence " + tab.ids[s] +
                                  " has " + std::to_string(tab.rows[s].size()) +
                                  " rows, expected " + std::to_string(T) + ")");
    for (std::size_t t = 1; t < T; ++t)
      if (tab.t_values[s][t] != tab.t_values[s][t - 1] + 1.0)
        throw std::invalid_argument(path + ": non-contiguous time grid in sequence " +
                                    tab.ids[s]);
  }
  return tab;
}

}  // namespace

Dataset ingest_dataset(const std::string& path) {
  const RawTable tab = read_table(path, /*integer_counts=*/true);
  Dataset out;
  const int T = static_cast<int>(tab.rows[0].size());
  for (std::size_t s = 0; s < tab.ids.size(); ++s) {
    Sequence seq;
    seq.id = tab.ids[s];
    seq.counts.resize(T, tab.K);
    seq.offsets.resize(T);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < tab.K; ++k)
        seq.counts(t, k) = static_cast<int>(tab.rows[s][t][k]);
      if (tab.has_offset) {
        seq.offsets[t] = tab.offsets[s][t];
      } else {
        const long total = seq.counts.row(t).sum();
        if (total <= 0)
          throw std::invalid_argument(path + ": all-zero row in sequence " + seq.id +
                                      " prevents logsum offsets; provide an offset "
                                      "column");
        seq.offsets[t] = std::log(static_cast<double>(total));
      }
    }
    seq.validate();
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

RealDataset ingest_real_dataset(const std::string& path) {
  const RawTable tab = read_table(path, /*integer_counts=*/false);
  RealDataset out;
  const int T = static_cast<int>(tab.rows[0].size());
  for (std::size_t s = 0; s < tab.ids.size(); ++s) {
    out.ids.push_back(tab.ids[s]);
    MatrixXd m(T, tab.K);
    VectorXd o = VectorXd::Zero(T);
    for (int t = 0; t < T; ++t) {
      m.row(t) = tab.rows[s][t].transpose();
      if (tab.has_offset) o[t] = tab.offsets[s][t];
    }
    out.values.push_back(std::move(m));
    out.offsets.push_back(std::move(o));
  }
  return out;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  if (data.size() == 0) throw std::invalid_argument("save_dataset_csv: empty dataset");
  const int K = data.sequences[0].K();
  std::ostringstream out;
  out << "sequence,t";
  for (int k = 1; k <= K; ++k) out << ",x" << k;
  out << ",offset\n";
  for (const Sequence& seq : data.sequences) {
    for (int t = 0; t < seq.T(); ++t) {
      out << seq.id << ',' << (t + 1);
      for (int k = 0; k < K; ++k) out << ',' << seq.counts(t, k);
      out << ',' << format_double(seq.offsets[t]) << '\n';
    }
  }
  write_text_file(path, out.str());
}

namespace {

json source_proxy_to_json(const SourceProxy& p) {
  return json{{"m", vector_to_json(p.m)},
              {"B_tilde", matrix_to_json(p.B_tilde)},
              {"b_tilde", matrix_to_json(p.b_tilde)},
              {"psi_tilde", matrix_to_json(p.psi_tilde)},
              {"mode", p.mode == ProxyMode::AR ? "ar" : "mean_field"}};
}

SourceProxy source_proxy_from_json(const json& j) {
  SourceProxy p;
  p.m = vector_from_json(j.at("m"));
  p.B_tilde = matrix_from_json(j.at("B_tilde"));
  p.b_tilde = matrix_from_json(j.at("b_tilde"));
  p.psi_tilde = matrix_from_json(j.at("psi_tilde"));
  p.mode = j.at("mode").get<std::string>() == "ar" ? ProxyMode::AR : ProxyMode::MeanField;
  return p;
}

json switch_proxy_to_json(const SwitchProxy& p) {
  json kernels = json::array();
  for (const MatrixXd& k : p.tau) kernels.push_back(matrix_to_json(k));
  return json{{"nu", matrix_to_json(p.nu)}, {"tau", std::move(kernels)},
              {"T", p.T}, {"d", p.d}, {"C", p.C}};
}

SwitchProxy switch_proxy_from_json(const json& j) {
  SwitchProxy p;
  p.nu = matrix_from_json(j.at("nu"));
  for (const json& k : j.at("tau")) p.tau.push_back(matrix_from_json(k));
  p.T = j.at("T").get<int>();
  p.d = j.at("d").get<int>();
  p.C = j.at("C").get<int>();
  return p;
}

}  // namespace

void save_fit_state(const FitState& state, const std::string& path) {
  json j;
  j["format"] = "countica-fit-state";
  j["version"] = 1;
  j["model"] = json::parse(model_to_json_string(state.model));
  j["epoch"] = state.epoch;
  j["converged"] = state.converged;
  j["seconds_per_epoch"] = state.seconds_per_epoch;
  j["elbo_trace"] = state.elbo_trace;
  json src = json::array();
  for (const SourceProxy& p : state.source_proxies) src.push_back(source_proxy_to_json(p));
  j["source_proxies"] = std::move(src);
  json sw = json::array();
  for (const SwitchProxy& p : state.switch_proxies) sw.push_back(switch_proxy_to_json(p));
  j["switch_proxies"] = std::move(sw);
  j["optimizer"] = {{"m", vector_to_json(state.optimizer.m)},
                    {"v", vector_to_json(state.optimizer.v)},
                    {"step", state.optimizer.step}};
  write_text_file(path, j.dump());
}

FitState load_fit_state(const std::string& path) {
  json j = json::parse(read_text_file(path));
  if (j.value("format", "") != "countica-fit-state")
    throw std::invalid_argument("fit state json: unknown format field");
  FitState s;
  s.model = model_from_json_string(j.at("model").dump());
  s.epoch = j.at("epoch").get<int>();
  s.converged = j.at("converged").get<bool>();
  s.seconds_per_epoch = j.at("seconds_per_epoch").get<double>();
  s.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
  for (const json& p : j.at("source_proxies"))
    s.source_proxies.push_back(source_proxy_from_json(p));
  for (const json& p : j.at("switch_proxies"))
    s.switch_proxies.push_back(switch_proxy_from_json(p));
  s.optimizer.m = vector_from_json(j.at("optimizer").at("m"));
  s.optimizer.v = vector_from_json(j.at("optimizer").at("v"));
  s.optimizer.step = j.at("optimizer").at("step").get<long>();
  return s;
}

void save_recovery_report(const RecoveryReport& report, std::uint64_t seed,
                          const std::string& config_hash, const std::string& path) {
  json j;
  j["alignment"] = {{"permutation", report.alignment.permutation},
                    {"signs", report.alignment.signs},
                    {"per_column_cosine", vector_to_json(report.alignment.per_column_cosine)},
                    {"mean_cosine", report.alignment.mean_cosine}};
  j["sliced_wasserstein"] = report.sliced_wasserstein;
  j["gram_coherence"] = matrix_to_json(report.gram_coherence);
  j["runtime_seconds"] = report.runtime_seconds;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["library_version"] = kLibraryVersion;
  write_text_file(path, j.dump(2));
}

void save_forecast_csv(const Forecast& forecast, int t0, const std::string& path) {
  std::ostringstream out;
  out << "t,feature,predicted_mean\n";
  for (int h = 0; h < forecast.horizon(); ++h)
    for (int k = 0; k < forecast.count_mean.cols(); ++k)
      out << (t0 + h + 1) << ',' << (k + 1) << ','
          << format_double(forecast.count_mean(h, k)) << '\n';
  write_text_file(path, out.str());
}

void save_forecast_sidecar_json(const Forecast& forecast, int t0,
                                const std::string& path) {
  json j;
  j["t0"] = t0;
  j["horizon"] = forecast.horizon();
  json alpha = json::array();
  for (const MatrixXd& a : forecast.alpha_hat) alpha.push_back(matrix_to_json(a));
  j["alpha_hat"] = std::move(alpha);
  j["mu_hat"] = matrix_to_json(forecast.mu_hat);
  j["psi_hat"] = matrix_to_json(forecast.psi_hat);
  j["map_path"] = matrix_to_json(forecast.map_path.cast<double>());
  j["variance_clamped"] = forecast.variance_clamped;
  write_text_file(path, j.dump(2));
}

void save_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                      const std::string& path) {
  std::ostringstream out;
  out << "metric,value\n";
  for (const auto& [name, value] : rows)
    out << name << ',' << format_double(value) << '\n';
  write_text_file(path, out.str());
}

}  // namespace countica
