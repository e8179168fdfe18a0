#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "trfe/trfe.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw trfe::ConfigError({"cannot open config file: " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            bool desk_scale, bool no_certify) {
  trfe::ExperimentConfig config;
  try {
    config = trfe::validate_config(
        config_path.empty() ? std::string() : read_file(config_path));
  } catch (const trfe::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  if (const char* env = std::getenv("TRFE_SEED"))
    config.seed = std::strtoull(env, nullptr, 10);
  if (desk_scale) config.apply_desk_scale();
  if (no_certify) config.certify = false;

  trfe::SweepProgress progress;
  progress.log = [](const std::string& s) { std::cerr << "[trfe] " << s << "\n"; };
  try {
    const auto rows = trfe::run_experiment(config, out_dir, progress);
    std::cout << trfe::kSweepCsvHeader << "\n";
    bool all_failed = true;
    for (const auto& r : rows) {
      std::cout << trfe::sweep_row_to_csv(r) << "\n";
      all_failed = all_failed && !r.error.empty();
    }
    std::cout << "wrote " << out_dir << "/sweep.csv\n";
    return all_failed ? kExitRuntime : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_plot(const std::string& in_csv, const std::string& out_file) {
  try {
    const trfe::SweepCsv data = trfe::read_sweep_csv(in_csv);
    const std::string svg = trfe::render_plot_svg(data.rows);
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw trfe::Error("cannot open output file: " + out_file);
    out << svg;
    std::cout << "wrote " << out_file << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "plot failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_oracle() {
  try {
    const auto outcomes = trfe::oracle_sandwich_suite(0, 5);
    bool ok = true;
    for (const auto& o : outcomes) {
      std::printf(
          "seed %d (%s): J_irr_ol=%.4f J_sc=%.4f J*=%.4f J_lqg=%.4f(+/-%.4f) "
          "J_ol=%.4f sandwich=%s tightening=%s\n",
          o.seed, o.kind.c_str(), o.J_irr_ol, o.J_sc, o.J_star, o.J_lqg,
          o.J_lqg_se, o.J_ol, o.sandwich_ok ? "ok" : "VIOLATED",
          o.tightening_ok ? "ok" : "VIOLATED");
      ok = ok && o.sandwich_ok && o.tightening_ok;
    }
    std::printf("%s\n", ok ? "all oracle instances passed"
                           : "oracle violations detected");
    return ok ? kExitOk : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "oracle suite failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified lower bounds on output-feedback control cost"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_csv, out_file;
  bool desk_scale = false, no_certify = false;

  auto* run = app.add_subcommand("run", "run the sigma_v sweep");
  run->add_option("--config", config_path, "JSON config (defaults when omitted)");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--desk-scale", desk_scale, "reduced Monte Carlo budgets");
  run->add_flag("--no-certify", no_certify,
                "do not cap the temperature grid at the convexity ceiling");

  auto* plot = app.add_subcommand("plot", "render a sweep CSV as SVG");
  plot->add_option("--in", in_csv, "sweep CSV")->required();
  plot->add_option("--out", out_file, "output SVG path")->required();

  app.add_subcommand("oracle", "run the linear-Gaussian sandwich suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (app.got_subcommand("run"))
    return cmd_run(config_path, out_dir, desk_scale, no_certify);
  if (app.got_subcommand("plot")) return cmd_plot(in_csv, out_file);
  return cmd_oracle();
}
