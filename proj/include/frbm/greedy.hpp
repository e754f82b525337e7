#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frbm/certify.hpp"
#include "frbm/eim.hpp"
#include "frbm/error.hpp"
#include "frbm/parallel.hpp"
#include "frbm/rbm.hpp"
#include "frbm/rhs.hpp"
#include "frbm/truth.hpp"

namespace frbm {

enum class GreedyMode { ResidualFree, ResidualBased };

inline const char* to_string(GreedyMode m) { return m == GreedyMode::ResidualFree ? "residual_free" : "residual_based"; }

inline GreedyMode greedy_mode_from_string(const std::string& s) {
  if (s == "residual_free") return GreedyMode::ResidualFree;
  if (s == "residual_based") return GreedyMode::ResidualBased;
  throw ConfigError("unknown greedy mode '" + s + "' (expected residual_free or residual_based)");
}

struct GreedyOptions {
  std::size_t n_max = 15;
  // residual_free: stop once the largest relative L²(Ω) change of u_N over
  // the training set between consecutive N drops below tol.
  // residual_based: stop once the largest Δ_N over the training set does.
  // 0 disables.
  double tol = 0.0;
  GreedyMode mode = GreedyMode::ResidualFree;
  bool random_first = false;
  unsigned long seed = 0;
  bool with_riesz = true;
  int threads = 0;
  // Snapshots enter the basis, so they are solved to near machine precision.
  SolverOptions snapshot_solver{1e-13, 20.0, Preconditioner::FastDiagonalization};
};

struct GreedyStep {
  std::size_t N = 0;
  Parameter mu;              // snapshot added at this step
  double max_objective = 0;  // max over the remaining training points after the step
  double max_change = 0;     // max relative L² change of u_N after the step
};

struct GreedyResult {
  ReducedModel model;
  std::vector<GreedyStep> history;
  std::vector<Parameter> skipped;  // dependent snapshots removed from the training set
};

inline std::size_t nearest_parameter(const std::vector<Parameter>& set, const Parameter& target) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double d = std::hypot(set[i].s - target.s, set[i].nu - target.nu);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

inline GreedyResult greedy_offline(const AffineTruthOperator& op, const std::vector<Vector>& loads, const RhsSpec& rhs,
                                   const std::vector<Parameter>& training, const GreedyOptions& opt,
                                   const SCMModel* scm = nullptr) {
  if (training.empty()) throw ConfigError("greedy: empty training set");
  if (opt.n_max == 0) throw ConfigError("greedy: N_max must be >= 1");
  if (opt.mode == GreedyMode::ResidualBased && !scm) throw ConfigError("greedy: residual_based mode needs an SCM model");
  for (const auto& mu : training) {
    if (!in_subdomain(op.subdomain(), mu.s)) throw ConfigError("greedy: training point outside the subdomain");
  }

  GreedyResult res;
  ReducedModel& model = res.model;
  model.subdomain = op.subdomain();
  model.rhs = rhs;
  model.eim = op.eim();
  const bool riesz_needed = opt.with_riesz || opt.mode == GreedyMode::ResidualBased;
  std::optional<RieszBuilder> riesz;
  if (riesz_needed) {
    riesz.emplace(op);
    riesz->add_loads(loads);
    model.riesz = riesz->data();
  }

  const std::size_t P = training.size();
  std::vector<bool> available(P, true);
  std::vector<Vector> previous(P);
  std::vector<double> objective(P, -1.0);

  std::size_t next;
  if (opt.random_first) {
    std::mt19937_64 rng(opt.seed);
    next = std::uniform_int_distribution<std::size_t>(0, P - 1)(rng);
  } else {
    double s_lo = training.front().s;
    double s_hi = s_lo;
    double nu_lo = training.front().nu;
    double nu_hi = nu_lo;
    for (const auto& mu : training) {
      s_lo = std::min(s_lo, mu.s);
      s_hi = std::max(s_hi, mu.s);
      nu_lo = std::min(nu_lo, mu.nu);
      nu_hi = std::max(nu_hi, mu.nu);
    }
    next = nearest_parameter(training, {0.5 * (s_lo + s_hi), 0.5 * (nu_lo + nu_hi)});
  }

  while (model.size() < opt.n_max) {
    const Parameter mu = training[next];
    available[next] = false;
    const TruthSolution snap = solve_truth(op, mu, combine_loads(loads, rhs_coefficients(rhs, mu.nu)), opt.snapshot_solver);
    if (!extend_reduced_model(model, op, loads, snap)) {
      res.skipped.push_back(mu);
      if (model.size() == 0) throw NumericalError("greedy: first snapshot is zero");
      objective[next] = -1.0;
    } else {
      if (riesz) {
        riesz->add_basis_vector(model.basis.col(static_cast<Eigen::Index>(model.size() - 1)));
        model.riesz = riesz->data();
      }
      if (model.size() >= opt.n_max) {
        res.history.push_back({model.size(), mu, 0.0, 0.0});
        break;
      }
      std::vector<double> change(P, 0.0);
      parallel_for(P, opt.threads, [&](std::size_t i) {
        const OnlineSolution sol = online_solve(model, training[i]);
        Vector d = sol.c;
        if (previous[i].size() > 0) d.head(previous[i].size()) -= previous[i];
        const double unorm = trace_l2_norm(model, sol.c);
        change[i] = unorm > 0.0 ? trace_l2_norm(model, d) / unorm : 0.0;
        previous[i] = sol.c;
        if (!available[i]) {
          objective[i] = -1.0;
        } else if (opt.mode == GreedyMode::ResidualFree) {
          objective[i] = sol.c.lpNorm<1>();
        } else {
          const std::vector<double> theta = model_theta(model, training[i]);
          const double beta = scm_lower_bound(*scm, theta);
          objective[i] = std::sqrt(scm_continuity(*scm, theta)) * residual_dual_norm(model, training[i], sol.c_orth) /
                         std::max(beta, std::numeric_limits<double>::min());
        }
      });
      GreedyStep step;
      step.N = model.size();
      step.mu = mu;
      step.max_change = *std::max_element(change.begin(), change.end());
      step.max_objective = *std::max_element(objective.begin(), objective.end());
      res.history.push_back(step);
      const double stat = opt.mode == GreedyMode::ResidualFree ? step.max_change : step.max_objective;
      if (opt.tol > 0.0 && model.size() > 1 && stat < opt.tol) break;
    }
    const auto it = std::max_element(objective.begin(), objective.end());
    if (*it < 0.0) break;
    next = static_cast<std::size_t>(it - objective.begin());
  }
  return res;
}

// ------------------------------------------------------ parameter sets

struct ParameterRange {
  double s_lo = 0.03;
  double s_hi = 0.97;
};

inline std::pair<double, double> subdomain_range(Subdomain d, const ParameterRange& r) {
  return d == Subdomain::D1 ? std::pair{r.s_lo, 0.5} : std::pair{0.5, r.s_hi};
}

/// Tensor training grid: n_s values of s on the subdomain (× n_nu values of
/// ν on [0, 1] when n_nu > 1).
inline std::vector<Parameter> training_grid(Subdomain d, const ParameterRange& r, std::size_t n_s, std::size_t n_nu = 1) {
  const auto [lo, hi] = subdomain_range(d, r);
  std::vector<Parameter> out;
  const auto nus = n_nu > 1 ? equispaced(0.0, 1.0, n_nu) : std::vector<double>{0.0};
  for (double s : equispaced(lo, hi, n_s))
    for (double nu : nus) out.push_back({s, nu});
  return out;
}

/// Test grid: P equispaced interior points per axis (endpoints dropped),
/// with every point that coincides with a training point removed.
inline std::vector<Parameter> test_grid(Subdomain d, const ParameterRange& r, std::size_t P_s, std::size_t P_nu,
                                        const std::vector<Parameter>& training) {
  const auto [lo, hi] = subdomain_range(d, r);
  auto interior = [](double a, double b, std::size_t n) {
    std::vector<double> v = equispaced(a, b, n + 2);
    return std::vector<double>(v.begin() + 1, v.end() - 1);
  };
  const auto ss = interior(lo, hi, P_s);
  const auto nus = P_nu > 1 ? interior(0.0, 1.0, P_nu) : std::vector<double>{0.0};
  std::vector<Parameter> out;
  for (double s : ss) {
    for (double nu : nus) {
      bool clash = false;
      for (const auto& t : training) {
        if (std::abs(t.s - s) < 1e-12 && std::abs(t.nu - nu) < 1e-12) {
          clash = true;
          break;
        }
      }
      if (!clash) out.push_back({s, nu});
    }
  }
  return out;
}

}  // namespace frbm
