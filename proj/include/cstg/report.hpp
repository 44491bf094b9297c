#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cstg/gates.hpp"
#include "cstg/matrix.hpp"

namespace cstg::report {

// 100 * mean(1[round(yhat) == y]); threshold 0.5.
double accuracy(const std::vector<double>& yhat_prob, const std::vector<double>& y);

// 1 - SS_res / SS_tot with SS_tot about mean(y); needs n >= 2 and var(y) > 0.
double r2_score(const std::vector<double>& yhat, const std::vector<double>& y);

struct ContextGates {
  std::vector<double> z;
  std::vector<double> mu;
  std::vector<double> gate;
  std::vector<double> weight;  // empty unless the model has a weight head
  std::vector<int> selected;   // explanatory features with gate > tau
};

struct GateSummary {
  std::vector<ContextGates> contexts;
  double mean_count = 0.0;
  int union_count = 0;
  std::vector<int> union_set;
  double tau = 0.5;
};

// Eval-mode gates/weights/selection for each supplied context row, plus the
// mean and union selected-feature counts (explanatory features only).
GateSummary gate_summary(const gates::GateModel& gm, const Matrix& contexts, double tau);

// gates.csv: header context_id, z_0..z_{L-1}, feature, mu, gate, weight,
// selected; one row per (context, feature). Doubles round-trip exactly.
void write_gates_csv(const GateSummary& summary, std::ostream& out);

struct GateCsvRow {
  int context_id = 0;
  std::vector<double> z;
  int feature = 0;
  double mu = 0.0;
  double gate = 0.0;
  std::optional<double> weight;
  bool selected = false;
};

std::vector<GateCsvRow> parse_gates_csv(std::istream& in);

// Plot-data export: header (context columns..., feature, value), one row per
// (context, feature) carrying the eval-mode gate value.
void write_plot_csv(const GateSummary& summary, std::ostream& out);

struct Theorem34Report {
  std::vector<double> mu_stg;        // trained global-STG gate means
  std::vector<double> mean_mu_cstg;  // context-average of the c-STG gate means
  double max_abs_gap = 0.0;
};

// Finite-sample check of the linear-regression relationship
// mu_stg = E_Z[mu(z)]: a D=6 problem with two equiprobable contexts whose
// true supports are features {0,1} and {2,3}; features 4 and 5 are never
// informative. Trains both models at small lambda and reports the
// componentwise gap. An empirical approximation, not an exact identity.
Theorem34Report theorem34_experiment(std::uint64_t seed);

// metrics.json: {metric_name, value, std, per_fold: [...]}.
nlohmann::ordered_json metrics_json(const std::string& metric_name, double value, double std_dev,
                                    const std::vector<double>& per_fold);

}  // namespace cstg::report
