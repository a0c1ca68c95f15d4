#ifndef EGW_REPORT_IO_HPP
#define EGW_REPORT_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egw/benchmark.hpp"
#include "egw/solver.hpp"
#include "egw/types.hpp"

namespace egw {

/// 17 significant digits: lossless decimal round-trip for doubles.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << body;
  if (!out) throw IoError("short write to '" + path + "'");
}

/// Coupling as CSV, row-major, header `i,j,mass`.
inline std::string plan_to_csv(const Matrix& plan) {
  std::ostringstream ss;
  ss << "i,j,mass\n";
  for (Eigen::Index i = 0; i < plan.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.cols(); ++j)
      ss << i << ',' << j << ',' << fmt17(plan(i, j)) << '\n';
  return ss.str();
}

/// Per-iteration trace, the columns the plots consume.
inline std::string trace_to_csv(const SolveReport& rep) {
  std::ostringstream ss;
  ss << "iter,phi,residual,envelope,delta_sup,sinkhorn_iters\n";
  for (const auto& row : rep.trace)
    ss << row.iter << ',' << fmt17(row.phi) << ',' << fmt17(row.residual) << ','
       << fmt17(row.envelope) << ',' << fmt17(row.delta_sup) << ','
       << row.sinkhorn_iters << '\n';
  return ss.str();
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  j["data"] = data;
  return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = data.at(idx++).get<double>();
  return m;
}

inline nlohmann::json certificate_to_json(const OracleCertificate& cert) {
  return nlohmann::json{{"delta_hilbert", cert.delta_hilbert},
                        {"delta_sup", cert.delta_sup},
                        {"iterations", cert.iterations},
                        {"lambda_K", cert.lambda_k},
                        {"marginal_violation", cert.marginal_violation},
                        {"met_tolerance", cert.met_tolerance},
                        {"certified", cert.certified},
                        {"first_iterate_hilbert_gap", cert.first_iterate_hilbert_gap},
                        {"gamma", cert.gamma}};
}

/// SolveReport as JSON. The coupling itself is delivered via plan.csv by the
/// CLI; everything else round-trips through this object.
inline nlohmann::json report_to_json(const SolveReport& rep) {
  nlohmann::json j;
  j["algorithm"] = to_string(rep.algorithm);
  j["status"] = to_string(rep.status);
  j["objective"] = rep.objective;
  j["best_objective"] = rep.best_objective;
  j["best_iter"] = rep.best_iter;
  j["best_a_norm"] = rep.best_a_norm;
  j["final_grad_norm"] = rep.final_grad_norm;
  j["outer_iterations"] = rep.outer_iterations;
  j["total_sinkhorn_iterations"] = rep.total_sinkhorn_iterations;
  j["L_used"] = rep.l_used;
  j["delta_plan"] = rep.delta_plan_used;
  j["delta_prime"] = rep.delta_prime;
  j["c0_distance"] = rep.c0_distance;
  j["final_A"] = matrix_to_json(rep.final_a);
  j["warnings"] = rep.warnings;
  nlohmann::json trace;
  for (const char* key :
       {"iter", "phi", "residual", "envelope", "delta_sup", "sinkhorn_iters"})
    trace[key] = nlohmann::json::array();
  for (const auto& row : rep.trace) {
    trace["iter"].push_back(row.iter);
    trace["phi"].push_back(row.phi);
    trace["residual"].push_back(row.residual);
    trace["envelope"].push_back(row.envelope);
    trace["delta_sup"].push_back(row.delta_sup);
    trace["sinkhorn_iters"].push_back(row.sinkhorn_iters);
  }
  j["trace"] = trace;
  return j;
}

inline std::string benchmark_to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream ss;
  ss << "d,N,trial,wall_time_seconds,outer_iters,total_sinkhorn_iters,objective,status\n";
  for (const auto& r : records)
    ss << r.d << ',' << r.n << ',' << r.trial << ',' << fmt17(r.wall_time_seconds)
       << ',' << r.outer_iters << ',' << r.total_sinkhorn_iters << ','
       << fmt17(r.objective) << ',' << r.status << '\n';
  return ss.str();
}

/// Sweep CSV: eps, objective, stationarity residual, then the final A
/// flattened row-major into d0*d1 columns A_0..A_{d0d1-1}.
inline std::string sweep_to_csv(const std::vector<SweepEntry>& entries) {
  std::ostringstream ss;
  Eigen::Index na = 0;
  for (const auto& e : entries) na = std::max(na, e.report.final_a.size());
  ss << "eps,objective,stationarity_residual,status";
  for (Eigen::Index k = 0; k < na; ++k) ss << ",A_" << k;
  ss << '\n';
  for (const auto& e : entries) {
    ss << fmt17(e.eps) << ',' << fmt17(e.report.objective) << ','
       << fmt17(e.stationarity_residual) << ',' << to_string(e.report.status);
    const Matrix& a = e.report.final_a;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) ss << ',' << fmt17(a(i, j));
    for (Eigen::Index k = a.size(); k < na; ++k) ss << ',';
    ss << '\n';
  }
  return ss.str();
}

}  // namespace egw

#endif  // EGW_REPORT_IO_HPP
