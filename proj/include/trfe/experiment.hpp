#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "trfe/baselines.hpp"
#include "trfe/certificates.hpp"
#include "trfe/config.hpp"
#include "trfe/convexity.hpp"
#include "trfe/free_energy.hpp"
#include "trfe/model.hpp"
#include "trfe/plot.hpp"
#include "trfe/self_consistent.hpp"
#include "trfe/systems.hpp"

namespace trfe {

inline const char* kSweepCsvHeader =
    "sigma_v,J_ol_rate,J_sc_rate,J_irr_ol_rate,J_lqg_rate,J_ol_norm,"
    "J_sc_norm,J_irr_ol_norm,J_lqg_norm,alpha_hat,beta_max_hat,beta_star,"
    "dropped_betas,J_ol_se_rate,J_sc_se_rate,J_lqg_se_rate,error";

namespace detail {

inline std::string csv_field(double v) { return fmt_double(v); }

inline std::string sanitize_error(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace detail

inline std::string sweep_row_to_csv(const SweepRow& r) {
  using detail::csv_field;
  std::string out;
  out += csv_field(r.sigma_v);
  for (double v : {r.j_ol_rate, r.j_sc_rate, r.j_irr_ol_rate, r.j_lqg_rate,
                   r.j_ol_norm, r.j_sc_norm, r.j_irr_ol_norm, r.j_lqg_norm,
                   r.alpha_hat, r.beta_max_hat, r.beta_star})
    out += "," + csv_field(v);
  out += "," + std::to_string(r.dropped_betas);
  for (double v : {r.j_ol_se_rate, r.j_sc_se_rate, r.j_lqg_se_rate})
    out += "," + csv_field(v);
  out += "," + detail::sanitize_error(r.error);
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline SweepRow sweep_row_from_fields(const std::vector<std::string>& f) {
  SweepRow r;
  auto num = [&](std::size_t i) { return std::strtod(f.at(i).c_str(), nullptr); };
  r.sigma_v = num(0);
  r.j_ol_rate = num(1);
  r.j_sc_rate = num(2);
  r.j_irr_ol_rate = num(3);
  r.j_lqg_rate = num(4);
  r.j_ol_norm = num(5);
  r.j_sc_norm = num(6);
  r.j_irr_ol_norm = num(7);
  r.j_lqg_norm = num(8);
  r.alpha_hat = num(9);
  r.beta_max_hat = num(10);
  r.beta_star = num(11);
  r.dropped_betas = static_cast<int>(num(12));
  r.j_ol_se_rate = num(13);
  r.j_sc_se_rate = num(14);
  r.j_lqg_se_rate = num(15);
  r.error = f.size() > 16 ? f[16] : "";
  return r;
}

struct SweepCsv {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
};

inline SweepCsv read_sweep_csv(const std::string& path) {
  SweepCsv out;
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (line.find("config_hash") != std::string::npos &&
          eq != std::string::npos)
        out.config_hash = line.substr(eq + 1);
      if (line.find("seed") != std::string::npos && eq != std::string::npos &&
          line.find("config_hash") == std::string::npos)
        out.seed = std::strtoull(line.substr(eq + 1).c_str(), nullptr, 10);
      continue;
    }
    if (line.rfind("sigma_v,", 0) == 0) continue;  // header row
    out.rows.push_back(sweep_row_from_fields(split_csv_line(line)));
  }
  return out;
}

// ---- sweep pipeline ----

struct SweepProgress {
  std::function<void(const std::string&)> log;  // optional
  void note(const std::string& s) const {
    if (log) log(s);
  }
};

/// Runs the full bound pipeline over the sigma_v sweep:
///   bank -> alpha/beta ceiling -> J_ol -> free-energy curve (beta grid
///   capped at the ceiling when certifying) -> per-sigma_v certificate,
///   OL-MI bound, bisection fixed point, LQG baseline.
/// The noise bank, open-loop optimum, curve and convexity estimate do not
/// depend on sigma_v, so they are computed once and shared by every row;
/// with common random numbers the result is identical to recomputing them.
/// Rows append to <out_dir>/sweep.csv as they finish; rerunning with the
/// same config hash skips rows already present.
template <class MakeSystem>
std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                MakeSystem&& make_system,
                                const std::string& out_dir,
                                const SweepProgress& progress = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string hash = config_hash(config);
  {
    std::ofstream echo(out_dir + "/resolved_config.json");
    echo << resolved_config(config).dump(2) << "\n";
  }

  const std::string csv_path = out_dir + "/sweep.csv";
  std::map<std::string, SweepRow> done;
  bool append = false;
  if (fs::exists(csv_path)) {
    const SweepCsv existing = read_sweep_csv(csv_path);
    if (existing.config_hash == hash) {
      append = true;
      for (const auto& r : existing.rows)
        done[detail::fmt_double(r.sigma_v)] = r;
    }
  }
  std::ofstream csv;
  if (append) {
    csv.open(csv_path, std::ios::app);
  } else {
    csv.open(csv_path, std::ios::trunc);
    csv << "# trfe sweep v1\n";
    csv << "# config_hash=" << hash << "\n";
    csv << "# seed=" << config.seed << "\n";
    csv << kSweepCsvHeader << "\n";
  }

  std::vector<SweepRow> rows;
  bool need_any = false;
  for (double sv : config.sigma_v_sweep)
    need_any = need_any || !done.count(detail::fmt_double(sv));

  // sigma_v-independent stage
  auto sys0 = make_system(config.sigma_v_sweep.front());
  using Sys = decltype(sys0);
  const int T = sys0.horizon, m = sys0.control_dim;
  ConvexityCertificate conv;
  OpenLoopResult ol;
  FreeEnergyCurve curve;
  if (need_any) {
    progress.note("building noise bank (" + std::to_string(config.samples) +
                  " samples)");
    const NoiseBank bank(config.seed, static_cast<int>(config.samples), T,
                         sys0.noise_dim(),
                         sys0.stochastic_x0 ? sys0.state_dim : 0);
    const MatrixXd u0 = MatrixXd::Zero(T, m);
    progress.note("estimating semiconvexity (n_alpha=" +
                  std::to_string(config.n_alpha) + ")");
    conv = estimate_semiconvexity(sys0, u0, config.n_alpha,
                                  mix_seed(config.seed, 0xA1FA));
    if (!conv.beta_max_defined)
      progress.note("warning: alpha_hat >= lambda_min(R); proceeding without "
                    "a certified temperature ceiling");
    progress.note("optimizing open-loop cost");
    ol = optimize_open_loop(sys0, bank, u0);
    progress.note("J_ol = " + detail::fmt_double(ol.J_ol) +
                  " (grad_norm = " + detail::fmt_double(ol.grad_norm) + ")");
    CurveOptions copts;
    copts.beta_min = config.beta_grid.min;
    copts.beta_max = config.beta_grid.max;
    if (config.certify && conv.beta_max_defined &&
        std::isfinite(conv.beta_max_hat))
      copts.beta_max = std::min(copts.beta_max, conv.beta_max_hat);
    copts.count = config.beta_grid.count;
    progress.note("sweeping " + std::to_string(copts.count) +
                  " inverse temperatures up to " +
                  detail::fmt_double(copts.beta_max));
    curve = build_free_energy_curve(sys0, bank, ol.u_ol, copts);
    progress.note("curve done, dropped " +
                  std::to_string(curve.dropped_count()) + " of " +
                  std::to_string(copts.count));
  }

  int row_index = 0;
  for (double sv : config.sigma_v_sweep) {
    ++row_index;
    const std::string key = detail::fmt_double(sv);
    if (auto it = done.find(key); it != done.end()) {
      rows.push_back(it->second);
      progress.note("sigma_v=" + key + " already present, skipping");
      continue;
    }
    SweepRow row;
    row.sigma_v = sv;
    try {
      const Sys sys = make_system(sv);
      const MatrixXd h = sensor_jacobian(sys, sys.x_ref(0));
      const CICertificate cert = waterfill_certificate(sys, h);
      const double eps = config.epsilon > 0.0
                             ? config.epsilon
                             : 1e-4 * std::max(ol.J_ol, 1.0);
      const BoundReport report = solve_fixed_point(curve, cert, ol.J_ol, eps);
      const LQGDesign design = design_lqg(sys);
      const BaselineResult base = lqg_baseline(
          sys, design, config.n_eval,
          mix_seed(config.seed, 0xB000 + static_cast<std::uint64_t>(row_index)));
      const double t = static_cast<double>(T);
      row.j_ol_rate = ol.J_ol / t;
      row.j_sc_rate = report.J_sc / t;
      row.j_irr_ol_rate = report.J_irr_ol / t;
      row.j_lqg_rate = base.J_lqg / t;
      row.j_ol_norm = row.j_ol_rate / row.j_ol_rate;
      row.j_sc_norm = row.j_sc_rate / row.j_ol_rate;
      row.j_irr_ol_norm = row.j_irr_ol_rate / row.j_ol_rate;
      row.j_lqg_norm = row.j_lqg_rate / row.j_ol_rate;
      row.alpha_hat = conv.alpha_hat;
      row.beta_max_hat = conv.beta_max_hat;
      row.beta_star = report.beta_star;
      row.dropped_betas = report.dropped_betas;
      row.j_ol_se_rate = ol.std_error / t;
      row.j_sc_se_rate = report.std_error_at_optimum / t;
      row.j_lqg_se_rate = base.std_error / t;
      progress.note("sigma_v=" + key +
                    ": J_sc/Jol=" + detail::fmt_double(row.j_sc_norm) +
                    " OL-MI=" + detail::fmt_double(row.j_irr_ol_norm) +
                    " LQG=" + detail::fmt_double(row.j_lqg_norm));
    } catch (const std::exception& e) {
      row.error = e.what();
      progress.note("sigma_v=" + key + " failed: " + row.error);
    }
    csv << sweep_row_to_csv(row) << "\n";
    csv.flush();
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<SweepRow> run_experiment(const ExperimentConfig& config,
                                            const std::string& out_dir,
                                            const SweepProgress& progress = {}) {
  if (config.system.name == "dubins") {
    return run_sweep(
        config,
        [&](double sv) {
          DubinsParams p = config.system.dubins;
          p.sigma_v = sv;
          return dubins_system(p);
        },
        out_dir, progress);
  }
  return run_sweep(
      config,
      [&](double sv) {
        return scalar_lqg_system(config.system.a, config.system.b,
                                 config.system.q, config.system.r,
                                 config.system.sigma_w, sv,
                                 config.system.x0_var, config.system.horizon)
            .system;
      },
      out_dir, progress);
}

// ---- linear-Gaussian sandwich suite ----

struct OracleOutcome {
  int seed = 0;
  std::string kind;
  double J_ol = 0.0;
  double J_sc = 0.0;
  double J_irr_ol = 0.0;
  double J_star = 0.0;  // analytic optimum
  double J_lqg = 0.0;
  double J_lqg_se = 0.0;
  bool sandwich_ok = false;   // J_sc <= J* <= J_lqg + 3 se
  bool tightening_ok = false; // J_sc >= J_irr_ol
};

/// Randomized scalar and 2-state instances; checks the central inequality
/// J_sc <= J* <= simulated LQG + 3 sigma on each.
inline OracleOutcome run_oracle_instance(int seed) {
  std::mt19937_64 gen(mix_seed(9000, static_cast<std::uint64_t>(seed)));
  auto unif = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  };

  OracleOutcome out;
  out.seed = seed;
  const int horizon = 20;
  LinearInstance inst;
  if (seed % 2 == 0) {
    out.kind = "scalar";
    inst = scalar_lqg_system(unif(0.7, 1.25), unif(0.6, 1.4), unif(0.5, 2.0),
                             unif(0.3, 1.2), unif(0.25, 0.6), unif(0.3, 2.5),
                             unif(0.3, 1.5), horizon);
  } else {
    out.kind = "two-state";
    MatrixXd a(2, 2), b(2, 1), h(1, 2), q(2, 2), r(1, 1);
    a << unif(0.7, 1.05), unif(0.05, 0.2), unif(-0.2, -0.05), unif(0.7, 1.05);
    b << unif(0.6, 1.2), unif(0.2, 0.8);
    h << 1.0, unif(0.1, 0.6);
    const double q1 = unif(0.5, 1.5), q2 = unif(0.3, 1.0), qc = unif(-0.2, 0.2);
    q << q1, qc, qc, q2;
    if (q.determinant() <= 1e-3) q(0, 1) = q(1, 0) = 0.0;
    r << unif(0.3, 1.2);
    const MatrixXd sw =
        unif(0.25, 0.6) * unif(0.25, 0.6) * MatrixXd::Identity(1, 1);
    const MatrixXd sv =
        unif(0.3, 2.0) * unif(0.3, 2.0) * MatrixXd::Identity(1, 1);
    const MatrixXd p0 = unif(0.3, 1.2) * MatrixXd::Identity(2, 2);
    inst = linear_system(a, b, h, q, r, sw, sv, VectorXd::Zero(2), p0, horizon);
  }

  const auto& sys = inst.system;
  const NoiseBank bank(mix_seed(77, static_cast<std::uint64_t>(seed)), 6000,
                       sys.horizon, sys.noise_dim(), sys.state_dim);
  const MatrixXd u0 = MatrixXd::Zero(sys.horizon, sys.control_dim);
  const OpenLoopResult ol = optimize_open_loop(sys, bank, u0);
  CurveOptions copts;
  copts.count = 40;
  const FreeEnergyCurve curve = build_free_energy_curve(sys, bank, ol.u_ol, copts);
  const CICertificate cert =
      waterfill_certificate(sys, sensor_jacobian(sys, sys.x_ref(0)));
  const BoundReport report = solve_fixed_point(
      curve, cert, ol.J_ol, 1e-4 * std::max(1.0, ol.J_ol));
  const LQGDesign design = design_lqg(sys);
  const BaselineResult base =
      lqg_baseline(sys, design, 4000, mix_seed(33, static_cast<std::uint64_t>(seed)));

  out.J_ol = ol.J_ol;
  out.J_sc = report.J_sc;
  out.J_irr_ol = report.J_irr_ol;
  out.J_star = lqg_analytic_cost(inst.spec);
  out.J_lqg = base.J_lqg;
  out.J_lqg_se = base.std_error;
  out.sandwich_ok = out.J_sc <= out.J_star &&
                    out.J_star <= out.J_lqg + 3.0 * out.J_lqg_se;
  out.tightening_ok = out.J_sc >= out.J_irr_ol;
  return out;
}

inline std::vector<OracleOutcome> oracle_sandwich_suite(int first_seed = 0,
                                                        int count = 5) {
  std::vector<OracleOutcome> out;
  for (int s = first_seed; s < first_seed + count; ++s)
    out.push_back(run_oracle_instance(s));
  return out;
}

}  // namespace trfe
