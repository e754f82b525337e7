#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "frbm/app.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string preset = "desk";
  std::vector<std::string> assignments;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

frbm::RunConfig resolve(const GlobalOptions& g) {
  frbm::RunConfig c = frbm::preset(g.preset);
  if (!g.config_path.empty()) frbm::config_load(c, g.config_path);
  for (const auto& a : g.assignments) frbm::config_assign(c, a);
  if (g.out_dir) c.out_dir = *g.out_dir;
  if (g.threads) c.threads = *g.threads;
  frbm::config_validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified reduced-basis solver for the spectral fractional Laplacian on the unit square"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--preset", g.preset, "desk or paper (applied before --config)");
  app.add_option("--set", g.assignments, "override one key, e.g. --set n_max=10");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");

  auto* build_eim = app.add_subcommand("build-eim", "build the EIM models and the decay CSV");
  auto* train = app.add_subcommand("train", "offline stage: SCM, greedy, convergence CSVs");

  frbm::EvalRequest eval_req;
  auto* eval = app.add_subcommand("eval", "online evaluation of a trained model");
  eval->add_option("--model", eval_req.model_path, "rb_D1.frbm or rb_D2.frbm")->required();
  eval->add_option("--s", eval_req.s, "fractional order")->required();
  eval->add_option("--nu", eval_req.nu, "load parameter (two-parameter problem)");
  eval->add_option("--dump", eval_req.dump_path, "write the trace as x1,x2,u CSV");

  frbm::CertifyRequest cert_req;
  auto* certify = app.add_subcommand("certify", "error bounds against truth solutions on a validation grid");
  certify->add_option("--model", cert_req.model_path, "single model file (default: every configured subdomain)");

  auto* bench = app.add_subcommand("bench", "truth vs reduced timing and crossover");
  auto* oracle = app.add_subcommand("validate-oracle", "truth trace against the analytic solution");
  auto* show = app.add_subcommand("show-config", "print the resolved configuration and its hash");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (eval->parsed()) return frbm::cmd_eval(eval_req, std::cout);
    const frbm::RunConfig c = resolve(g);
    if (build_eim->parsed()) return frbm::cmd_build_eim(c, std::cout);
    if (train->parsed()) return frbm::cmd_train(c, std::cout);
    if (certify->parsed()) return frbm::cmd_certify(c, cert_req, std::cout);
    if (bench->parsed()) return frbm::cmd_bench(c, std::cout);
    if (oracle->parsed()) return frbm::cmd_validate_oracle(c, std::cout);
    if (show->parsed()) {
      std::cout << "# config_hash=" << frbm::config_hash(c) << '\n' << frbm::config_canonical(c);
      std::cout << "out_dir=" << c.out_dir << "\nthreads=" << c.threads << '\n';
      return 0;
    }
  } catch (const frbm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const frbm::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 4;
  } catch (const frbm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
