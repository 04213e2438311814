#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rica {

// Per-entry status of a cross-information line search.
enum class SearchStatus : std::uint8_t {
  kOk = 0,
  kNoSignChange,   // h stayed positive up to lambda_max; fallback value used
  kGuardSkipped,   // positivity guard failed at the preliminary; update zeroed
  kSingular,       // a perturbed matrix was singular; treated as sign change
};

const char* to_string(SearchStatus s);

// Estimated cross-information quantities feeding the one-step update.
// Diagonal entries are unused and kept at zero.
struct CrossInfoEstimates {
  Eigen::MatrixXd gamma_star;  // k x k, entry (p,q) = gamma*_{pq}
  Eigen::MatrixXd rho_star;    // k x k, entry (p,q) = rho*_{pq}
  double grid_constant = 0.0;  // the c of the lambda grid
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> gamma_status;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> rho_status;
  // bracketing diagnostics, row-major (r,s) with r != s
  struct Bracket {
    int r = 0, s = 0;
    bool rho = false;
    double lambda_lo = 0.0, lambda_hi = 0.0;
    double h_lo = 0.0, h_hi = 0.0;
  };
  std::vector<Bracket> brackets;

  int dim() const { return static_cast<int>(gamma_star.rows()); }
  SearchStatus gstatus(int r, int s) const { return static_cast<SearchStatus>(gamma_status(r, s)); }
  SearchStatus rstatus(int r, int s) const { return static_cast<SearchStatus>(rho_status(r, s)); }
  bool all_ok() const;
  std::string flag_summary() const;

  static CrossInfoEstimates zeros(int k);
};

}  // namespace rica
