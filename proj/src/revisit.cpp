#include "epow/revisit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "epow/rand.hpp"

namespace epow::revisit {

const char* to_string(Policy p) {
  switch (p) {
    case Policy::Uniform: return "uniform";
    case Policy::Proportional: return "proportional";
    case Policy::OptimalFreshness: return "optimal-freshness";
    case Policy::OptimalAge: return "optimal-age";
  }
  return "unknown";
}

std::optional<Policy> policy_from_string(const std::string& name) {
  if (name == "uniform") return Policy::Uniform;
  if (name == "proportional") return Policy::Proportional;
  if (name == "optimal-freshness") return Policy::OptimalFreshness;
  if (name == "optimal-age") return Policy::OptimalAge;
  return std::nullopt;
}

const char* to_string(EstimateError e) {
  switch (e) {
    case EstimateError::Saturated: return "saturated (every visit saw a change)";
    case EstimateError::IrregularHistory: return "irregular visit spacing";
    case EstimateError::TooFewVisits: return "too few visits";
  }
  return "unknown";
}

namespace {

void check_domain(double lambda, double interval) {
  if (interval <= 0) throw std::invalid_argument("interval must be > 0");
  if (lambda < 0) throw std::invalid_argument("change rate must be >= 0");
}

}  // namespace

double expected_freshness(double lambda, double interval) {
  check_domain(lambda, interval);
  if (lambda == 0) return 1.0;
  double x = lambda * interval;
  return -std::expm1(-x) / x;
}

double expected_age(double lambda, double interval) {
  check_domain(lambda, interval);
  if (lambda == 0) return 0.0;
  double x = lambda * interval;
  if (x < 1e-3) {
    // series for x -> 0 where the closed form cancels catastrophically
    return interval * (x / 6.0 - x * x / 24.0 + x * x * x / 120.0);
  }
  return interval * (0.5 - 1.0 / x + (-std::expm1(-x)) / (x * x));
}

Expected<double, EstimateError> estimate_change_rate_counts(uint64_t changes,
                                                            uint64_t intervals,
                                                            double interval) {
  if (interval <= 0) throw std::invalid_argument("interval must be > 0");
  if (changes > intervals)
    throw std::invalid_argument("more changes than intervals");
  if (intervals == 0) return EstimateError::TooFewVisits;
  if (changes == intervals) return EstimateError::Saturated;
  if (changes == 0) return 0.0;
  double ratio = static_cast<double>(changes) / static_cast<double>(intervals);
  return -std::log1p(-ratio) / interval;
}

Expected<double, EstimateError> estimate_change_rate(
    const ObservationHistory& h) {
  if (h.size() < 2) return EstimateError::TooFewVisits;
  double span = h.back().visit_time - h.front().visit_time;
  uint64_t n = h.size() - 1;
  double mean = span / static_cast<double>(n);
  if (!(mean > 0)) throw std::invalid_argument("visit times must increase");
  uint64_t changes = 0;
  for (size_t i = 1; i < h.size(); ++i) {
    double gap = h[i].visit_time - h[i - 1].visit_time;
    if (gap <= 0) throw std::invalid_argument("visit times must increase");
    if (std::abs(gap - mean) > 0.01 * mean)
      return EstimateError::IrregularHistory;
    if (h[i].changed_since_last_visit) ++changes;
  }
  return estimate_change_rate_counts(changes, n, mean);
}

double freshness_at_frequency(double lambda, double frequency) {
  if (frequency <= 0) return lambda == 0 ? 1.0 : 0.0;
  return expected_freshness(lambda, 1.0 / frequency);
}

double age_at_frequency(double lambda, double frequency, double horizon) {
  if (lambda == 0) return 0.0;
  double interval = frequency > 0 ? std::min(1.0 / frequency, horizon) : horizon;
  return expected_age(lambda, interval);
}

namespace {

// Exact grid optimization: dynamic program over discrete budget units.
// value(i, u) is page i's objective when given u units of frequency.
std::vector<double> grid_optimize(const std::vector<double>& lambdas,
                                  double budget, double resolution,
                                  bool maximize_freshness, double age_horizon) {
  size_t n = lambdas.size();
  size_t units = static_cast<size_t>(budget / resolution + 1e-9);
  auto value = [&](size_t page, size_t u) {
    double f = static_cast<double>(u) * resolution;
    if (maximize_freshness) return freshness_at_frequency(lambdas[page], f);
    return -age_at_frequency(lambdas[page], f, age_horizon);
  };

  // best[u] = max total value over pages seen so far using exactly u units
  constexpr double kNegInf = -1e300;
  std::vector<double> best(units + 1, kNegInf);
  best[0] = 0.0;
  std::vector<std::vector<uint32_t>> choice(n, std::vector<uint32_t>(units + 1, 0));
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> next(units + 1, kNegInf);
    for (size_t u = 0; u <= units; ++u) {
      for (size_t a = 0; a <= u; ++a) {
        if (best[u - a] == kNegInf) continue;
        double v = best[u - a] + value(i, a);
        if (v > next[u]) {
          next[u] = v;
          choice[i][u] = static_cast<uint32_t>(a);
        }
      }
    }
    best = std::move(next);
  }

  size_t best_u = 0;
  for (size_t u = 1; u <= units; ++u)
    if (best[u] > best[best_u]) best_u = u;

  std::vector<double> freqs(n, 0.0);
  size_t u = best_u;
  for (size_t i = n; i-- > 0;) {
    uint32_t a = choice[i][u];
    freqs[i] = static_cast<double>(a) * resolution;
    u -= a;
  }
  return freqs;
}

// Reassign the chosen frequencies so they are nondecreasing in lambda.
// For the age objective a faster-changing page never benefits less from a
// given frequency than a slower one, so this permutation cannot increase
// total age; it makes the monotone shape hold among tied optima too.
void rearrange_monotone(const std::vector<double>& lambdas,
                        std::vector<double>& freqs) {
  size_t n = lambdas.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return lambdas[a] < lambdas[b]; });
  std::vector<double> sorted = freqs;
  std::sort(sorted.begin(), sorted.end());
  for (size_t k = 0; k < n; ++k) freqs[order[k]] = sorted[k];
}

}  // namespace

RevisitPlan plan_revisits(Policy policy, const std::vector<double>& lambdas,
                          double budget, const PlanParams& params) {
  if (!(budget > 0)) throw std::invalid_argument("budget must be > 0");
  if (lambdas.empty()) throw std::invalid_argument("no pages to plan");
  for (double l : lambdas)
    if (l < 0) throw std::invalid_argument("change rate must be >= 0");
  if (!(params.grid_resolution > 0))
    throw std::invalid_argument("grid resolution must be > 0");

  size_t n = lambdas.size();
  RevisitPlan plan;
  plan.policy = policy;
  plan.budget = budget;
  plan.frequencies.assign(n, 0.0);

  switch (policy) {
    case Policy::Uniform: {
      double f = budget / static_cast<double>(n);
      plan.frequencies.assign(n, f);
      break;
    }
    case Policy::Proportional: {
      double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
      if (total > 0) {
        for (size_t i = 0; i < n; ++i)
          plan.frequencies[i] = budget * lambdas[i] / total;
      }
      break;
    }
    case Policy::OptimalFreshness:
      plan.frequencies = grid_optimize(lambdas, budget, params.grid_resolution,
                                       true, params.age_horizon);
      break;
    case Policy::OptimalAge:
      plan.frequencies = grid_optimize(lambdas, budget, params.grid_resolution,
                                       false, params.age_horizon);
      rearrange_monotone(lambdas, plan.frequencies);
      break;
  }

  double fresh = 0.0, age = 0.0;
  for (size_t i = 0; i < n; ++i) {
    fresh += freshness_at_frequency(lambdas[i], plan.frequencies[i]);
    age += age_at_frequency(lambdas[i], plan.frequencies[i], params.age_horizon);
  }
  plan.predicted_avg_freshness = fresh / static_cast<double>(n);
  plan.predicted_avg_age = age / static_cast<double>(n);
  return plan;
}

std::string RevisitPlan::export_csv(const std::vector<double>& lambdas) const {
  std::ostringstream out;
  out << "page,lambda,frequency,predicted_freshness\n";
  for (size_t i = 0; i < frequencies.size(); ++i) {
    char row[128];
    std::snprintf(row, sizeof row, "%zu,%.6g,%.6f,%.6f\n", i, lambdas[i],
                  frequencies[i],
                  freshness_at_frequency(lambdas[i], frequencies[i]));
    out << row;
  }
  return out.str();
}

SimulationResult evaluate_plan(const RevisitPlan& plan,
                               const std::vector<double>& lambdas,
                               double horizon, uint64_t seed, int trials) {
  size_t n = lambdas.size();
  std::vector<double> fresh_trials, age_trials;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed + static_cast<uint64_t>(trial) * 0x9e3779b97f4a7c15ull);
    double fresh_sum = 0.0, age_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double lambda = lambdas[i];
      double f = plan.frequencies[i];

      std::vector<double> changes;
      if (lambda > 0) {
        for (double t = rng.exponential(lambda); t < horizon;
             t += rng.exponential(lambda))
          changes.push_back(t);
      }

      // walk the merged change/visit timeline, page synced at t = 0
      double fresh_accum = 0.0, age_accum = 0.0;
      double last_t = 0.0, stale_since = -1.0;
      size_t ci = 0;
      uint64_t vk = 1;
      auto account = [&](double t) {
        if (stale_since < 0) {
          fresh_accum += t - last_t;
        } else {
          double a = last_t - stale_since, b = t - stale_since;
          age_accum += (b * b - a * a) / 2.0;
        }
        last_t = t;
      };
      for (;;) {
        double next_change =
            ci < changes.size() ? changes[ci] : std::numeric_limits<double>::infinity();
        double next_visit = f > 0 ? static_cast<double>(vk) / f
                                  : std::numeric_limits<double>::infinity();
        double e = std::min(next_change, next_visit);
        if (e >= horizon) break;
        account(e);
        if (next_change <= next_visit) {
          if (stale_since < 0) stale_since = e;
          ++ci;
        } else {
          stale_since = -1.0;
          ++vk;
        }
      }
      account(horizon);
      fresh_sum += fresh_accum / horizon;
      age_sum += age_accum / horizon;
    }
    fresh_trials.push_back(fresh_sum / static_cast<double>(n));
    age_trials.push_back(age_sum / static_cast<double>(n));
  }

  auto summarize = [&](const std::vector<double>& xs, double& mean, double& se) {
    mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() > 1 ? (xs.size() - 1) : 1;
    se = std::sqrt(var / xs.size());
  };
  SimulationResult r;
  summarize(fresh_trials, r.avg_freshness, r.freshness_stderr);
  summarize(age_trials, r.avg_age, r.age_stderr);
  return r;
}

}  // namespace epow::revisit
