#pragma once

// A small but complete problem per subdomain, shared by the reduced-basis,
// certification and greedy tests.

#include <memory>

#include "frbm/certify.hpp"
#include "frbm/greedy.hpp"

namespace fixture {

struct Problem {
  frbm::Subdomain d;
  std::shared_ptr<const frbm::TruthDiscretization> truth;
  std::unique_ptr<frbm::AffineTruthOperator> op;
  frbm::RhsSpec rhs;
  std::vector<frbm::Vector> loads;
  std::vector<frbm::Parameter> training;
};

inline Problem make_problem(frbm::Subdomain d, int n = 8, int M = 12, frbm::RhsSpec rhs = {}, std::size_t q_max = 12) {
  using namespace frbm;
  const double gamma = d == Subdomain::D1 ? 6.0 : 2.0;
  Problem p;
  p.d = d;
  p.rhs = rhs;
  p.truth = make_truth({n, M, gamma, 2.233});
  const ParameterRange range;
  const auto [lo, hi] = subdomain_range(d, range);
  EIMModel eim = eim_build(d, eim_y_grid(d, M, 8, gamma, 2.233), equispaced(lo, hi, 65), q_max, 1e-11);
  p.op = std::make_unique<AffineTruthOperator>(p.truth, std::move(eim));
  p.loads = assemble_loads(*p.truth, rhs);
  p.training = training_grid(d, range, 33, rhs_depends_on_nu(rhs) ? 5 : 1);
  return p;
}

inline frbm::GreedyResult train(const Problem& p, std::size_t n_max, const frbm::SCMModel* scm = nullptr,
                                frbm::GreedyMode mode = frbm::GreedyMode::ResidualFree) {
  frbm::GreedyOptions opt;
  opt.n_max = n_max;
  opt.mode = mode;
  return frbm::greedy_offline(*p.op, p.loads, p.rhs, p.training, opt, scm);
}

inline std::vector<double> training_s(const Problem& p) {
  std::vector<double> s;
  for (const auto& mu : p.training) s.push_back(mu.s);
  return s;
}

inline frbm::Vector truth_solution(const Problem& p, const frbm::Parameter& mu) {
  return frbm::solve_truth(*p.op, mu, frbm::combine_loads(p.loads, frbm::rhs_coefficients(p.rhs, mu.nu)), {1e-13}).coeffs;
}

// Dense matrix of the μ operator and of the reference Gram.
inline frbm::Matrix dense_operator(const Problem& p, const frbm::Parameter& mu) {
  return frbm::Matrix(frbm::kronecker_assemble(p.truth->basis(), p.op->factors(mu)));
}

inline frbm::Matrix dense_reference(const Problem& p) {
  return frbm::Matrix(frbm::kronecker_assemble(p.truth->basis(), p.truth->reference()));
}

}  // namespace fixture
