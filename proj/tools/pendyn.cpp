#include <pendyn/app.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<double> split_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = tok.find_last_not_of(" \t");
    out.push_back(pendyn::parse_scalar(tok.substr(b, e - b + 1)));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pendyn;
  CLI::App app{"Second-order penalty dynamics for monotone inclusions: validate, run, sweep."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool force = false;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string param, values, metric = "final_distance";

  auto* validate = app.add_subcommand("validate", "check hypotheses, oracle certificate and operator properties");
  validate->add_option("--config", config_path, "experiment config (JSON)")->required();
  validate->add_option("--seed", seed, "seed for the sampled property checks");

  auto* run = app.add_subcommand("run", "integrate, diagnose and write artifacts");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
  run->add_flag("--force", force, "run even when hypotheses fail (verdicts suppressed)");
  run->add_option("--seed", seed, "seed recorded with the run");

  auto* sweep = app.add_subcommand("sweep", "run one config over a list of parameter values");
  sweep->add_option("--config", config_path, "experiment config (JSON)")->required();
  sweep->add_option("--param", param, "parameter, e.g. lambda.p or gamma.floor")->required();
  sweep->add_option("--values", values, "comma-separated values; 'sqrt2' allowed")->required();
  sweep->add_option("--metric", metric, "final_distance | final_velocity | ergodic_distance");
  sweep->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
  sweep->add_flag("--force", force, "run configurations whose hypotheses fail");
  sweep->add_option("--seed", seed, "seed recorded with the runs");

  auto* list = app.add_subcommand("gallery", "list the built-in problem instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (list->parsed()) return cmd_gallery(std::cout);

    ExperimentConfig cfg = load_config(config_path);
    if (app.get_subcommands().front()->count("--seed")) cfg.seed = seed;
    RunOptions opts;
    opts.force = force;
    if (!out_dir.empty()) opts.out = out_dir;

    if (validate->parsed()) return cmd_validate(cfg, std::cout);
    if (run->parsed()) return cmd_run(cfg, opts, std::cout, std::cerr);
    if (sweep->parsed()) {
      SweepSpec s;
      s.param = param;
      s.values = split_values(values);
      s.metric = metric;
      s.jobs = jobs;
      if (s.values.empty()) {
        std::cerr << "usage error: --values lists no values\n";
        return kExitValidation;
      }
      return cmd_sweep(cfg, s, opts, std::cout, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    const bool usage = e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kParse;
    std::cerr << (usage ? "error: " : "runtime error: ") << e.what() << "\n";
    return usage ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
