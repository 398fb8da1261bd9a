#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epow/expected.hpp"

namespace epow::revisit {

/// Pages change as independent Poisson processes; lambda is the expected
/// number of changes per unit time (0 = immutable page).
struct ChangeModel {
  double lambda = 0.0;
};

enum class Policy {
  Uniform,
  Proportional,
  OptimalFreshness,
  OptimalAge,
};

const char* to_string(Policy p);
std::optional<Policy> policy_from_string(const std::string& name);

/// Time-averaged probability that the local copy matches the live page when
/// the page is revisited every I time units: (1 - e^(-lambda*I)) / (lambda*I).
/// Throws std::invalid_argument if I <= 0 or lambda < 0.
double expected_freshness(double lambda, double interval);

/// Time-averaged staleness duration under the same regime:
/// I/2 - 1/lambda + (1 - e^(-lambda*I)) / (lambda^2 * I); 0 when lambda = 0.
/// Throws std::invalid_argument if I <= 0 or lambda < 0.
double expected_age(double lambda, double interval);

struct Observation {
  double visit_time = 0.0;
  bool changed_since_last_visit = false;
};

/// Visit log for one page; visit times must be strictly increasing.
using ObservationHistory = std::vector<Observation>;

enum class EstimateError {
  Saturated,        // every interval saw a change; rate unresolvable
  IrregularHistory, // visit spacing varies by more than 1%
  TooFewVisits,
};

const char* to_string(EstimateError e);

/// MLE for change-detected-per-interval sampling at regular interval I:
/// lambda = -ln(1 - X/n) / I.
Expected<double, EstimateError> estimate_change_rate_counts(uint64_t changes,
                                                            uint64_t intervals,
                                                            double interval);

/// Same estimator driven from a visit log. The first entry is the baseline
/// sync; each later entry contributes one interval.
Expected<double, EstimateError> estimate_change_rate(const ObservationHistory& h);

struct RevisitPlan {
  Policy policy = Policy::Uniform;
  std::vector<double> frequencies;  // visits per unit time, >= 0
  double budget = 0.0;              // sum of frequencies <= budget
  double predicted_avg_freshness = 0.0;
  double predicted_avg_age = 0.0;

  /// Comma-separated export with a header row: page, lambda, frequency,
  /// predicted freshness contribution.
  std::string export_csv(const std::vector<double>& lambdas) const;
};

struct PlanParams {
  double grid_resolution = 0.1;  // frequency grid step for the optimal policies
  double age_horizon = 100.0;    // age cost cap for abandoned pages
};

/// Allocate a total revisit budget B (visits per unit time) across pages.
/// Uniform splits evenly; Proportional follows lambda; the two optimal
/// policies search a discrete frequency grid exactly (dynamic program over
/// budget units). Throws std::invalid_argument for B <= 0 or negative lambda.
RevisitPlan plan_revisits(Policy policy, const std::vector<double>& lambdas,
                          double budget, const PlanParams& params = {});

/// Per-page freshness value used by the planner: frequency 0 contributes 1
/// for an immutable page and 0 otherwise.
double freshness_at_frequency(double lambda, double frequency);

/// Per-page age cost used by the planner; intervals longer than the horizon
/// (including frequency 0) are evaluated at the horizon.
double age_at_frequency(double lambda, double frequency, double horizon);

struct SimulationResult {
  double avg_freshness = 0.0;
  double avg_age = 0.0;
  double freshness_stderr = 0.0;
  double age_stderr = 0.0;
};

/// Independent check of a plan by discrete-event simulation: Poisson change
/// streams against periodic revisits over `horizon`, repeated `trials` times
/// with distinct seeds. Single-threaded and reproducible per seed.
SimulationResult evaluate_plan(const RevisitPlan& plan,
                               const std::vector<double>& lambdas,
                               double horizon, uint64_t seed,
                               int trials = 8);

}  // namespace epow::revisit
