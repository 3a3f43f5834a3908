// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
//   acceptance                  run criteria 1-12 (13 needs --cli)
//   acceptance --criterion 6    run one criterion
//   acceptance --criterion 13 --cli path/to/tripstab_cli --workdir dir

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tripstab/tripstab.hpp"

using namespace tripstab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string rel_report(const char* name, double got, double want) {
  return std::string(name) + "=" + num(got) + " (expected " + num(want) + ")";
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// 1. Analytic gradient against central finite differences.
Outcome criterion1() {
  CheckOptions opt;
  opt.probes = 1000;
  opt.seed = 1001;
  const CheckResult r = gradient_check(opt, 1e-6, 1e-6);
  return {r.violations == 0, "probes=" + std::to_string(r.probes) + " violations=" + std::to_string(r.violations) +
                                 " worst_rel_err=" + num(r.worst)};
}

// 2. Lipschitz, smoothness and midpoint convexity at B = 1.
Outcome criterion2() {
  CheckOptions opt;
  opt.probes = 10000;
  opt.seed = 1002;
  const CheckResult lip = lipschitz_check(opt);
  const CheckResult smooth = smoothness_check(opt);
  const CheckResult conv = convexity_check(opt);
  const bool ok = lip.violations == 0 && smooth.violations == 0 && conv.violations == 0 && lip.limit == 8.0 &&
                  smooth.limit == 64.0;
  return {ok, "lipschitz max_ratio=" + num(lip.worst) + "/8 violations=" + std::to_string(lip.violations) +
                  "; smoothness max_ratio=" + num(smooth.worst) + "/64 violations=" +
                  std::to_string(smooth.violations) + "; convexity max_excess=" + num(conv.worst) +
                  " violations=" + std::to_string(conv.violations)};
}

// 3. Exact empirical risk against a nested-loop oracle.
Outcome criterion3() {
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<std::size_t> np_dist(2, 6), nm_dist(1, 4), d_dist(1, 4);
  std::uniform_real_distribution<double> feat(-1.0, 1.0), entry(-2.0, 2.0), zeta(0.0, 1.0);
  double worst = 0.0;
  int bad = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t np = np_dist(rng), nm = nm_dist(rng), d = d_dist(rng);
    std::vector<std::vector<double>> P(np, std::vector<double>(d)), N(nm, std::vector<double>(d));
    for (auto& row : P)
      for (auto& x : row) x = feat(rng) / std::sqrt(static_cast<double>(d));
    for (auto& row : N)
      for (auto& x : row) x = feat(rng) / std::sqrt(static_cast<double>(d));
    std::vector<std::vector<double>> W(d, std::vector<double>(d));
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) W[a][b] = W[b][a] = entry(rng);
    const double z = zeta(rng);

    auto score = [&](const std::vector<double>& x, const std::vector<double>& y) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) s += (x[a] - y[a]) * W[a][b] * (x[b] - y[b]);
      return s;
    };
    long double sum = 0.0L;
    std::size_t count = 0;
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t j = 0; j < np; ++j) {
        if (i == j) continue;
        for (std::size_t k = 0; k < nm; ++k) {
          const double u = score(P[i], P[j]) - score(P[i], N[k]) + z;
          sum += std::log1p(std::exp(-u));
          ++count;
        }
      }
    const double oracle = static_cast<double>(sum / static_cast<long double>(count));

    std::vector<Sample> ps, ns;
    for (const auto& row : P) ps.push_back({Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(d)), 1, Pool::Positive});
    for (const auto& row : N) ns.push_back({Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(d)), 0, Pool::Negative});
    Matrix wm(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) wm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = W[a][b];
    const double got = exact_empirical_risk(MetricParams::from_matrix(wm), make_dataset(ps, ns), LossConfig{z});
    const double err = std::abs(got - oracle);
    worst = std::max(worst, err);
    if (!(err <= 1e-12)) ++bad;
  }
  return {bad == 0, "draws=100 mismatches=" + std::to_string(bad) + " max_abs_err=" + num(worst)};
}

// 4. 1-expansiveness of the SGD step at eta = 1 / (32 B^4).
Outcome criterion4() {
  CheckOptions opt;
  opt.probes = 10000;
  opt.seed = 1004;
  const CheckResult r = expansiveness_sweep(opt);
  return {r.violations == 0, "probes=10000 violations=" + std::to_string(r.violations) +
                                 " max_contraction_ratio=" + num(r.worst)};
}

// 5. Paired SGD runs under a shared seed against the trace bound.
Outcome criterion5() {
  TaskConfig task;
  task.n_plus = 50;
  task.n_minus = 50;
  task.noise_scale = 0.5;
  SgdConfig sgd;
  sgd.T = 500;
  StabilityOptions opt;
  opt.seed = 1005;
  const StabilityReport r = estimate_uniform_stability(sgd, task, 50, 10000, opt);
  double worst = 0.0;
  for (const auto& t : r.records)
    if (t.bound && *t.bound > 0.0) worst = std::max(worst, t.value / *t.bound);
  return {r.violations == 0 && r.records.size() == 50,
          "runs=50 violations=" + std::to_string(r.violations) + " gamma_hat=" + num(r.gamma_hat) +
              " max_value/bound=" + num(worst)};
}

// 6. RRM single-replacement stability against min{8/n+, 4/n-} L^2 / (2 lambda).
Outcome criterion6() {
  TaskConfig task;
  task.noise_scale = 0.5;
  std::uint64_t violations = 0;
  std::string detail;
  for (const std::size_t n : {32, 64, 128}) {
    for (const double lambda : {0.05, 0.5}) {
      RrmConfig rrm;
      rrm.lambda = lambda;
      StabilityOptions opt;
      opt.seed = derive_seed(1006, n, static_cast<std::uint64_t>(lambda * 100));
      const StabilityReport r = estimate_uniform_stability(rrm, task.with_sizes(n, n), 50, 10000, opt);
      violations += r.violations;
      detail += " n=" + std::to_string(n) + ",lambda=" + num(lambda) + ":gamma_hat=" + num(r.gamma_hat) +
                "/bound=" + num(r.gamma_bound.value_or(-1.0));
    }
  }
  return {violations == 0, "trials=300 violations=" + std::to_string(violations) + ";" + detail};
}

// 7. Triple replacement against three times the RRM bound.
Outcome criterion7() {
  TaskConfig task = TaskConfig{}.with_sizes(64, 64);
  task.noise_scale = 0.5;
  RrmConfig rrm;
  rrm.lambda = 0.1;
  StabilityOptions opt;
  opt.replacement = Replacement::Triple;
  opt.seed = 1007;
  const StabilityReport r = estimate_uniform_stability(rrm, task, 30, 10000, opt);
  return {r.violations == 0 && r.records.size() == 30,
          "trials=30 violations=" + std::to_string(r.violations) + " gamma_hat=" + num(r.gamma_hat) +
              " envelope=" + num(r.gamma_bound.value_or(-1.0))};
}

// 8. Slot-hit counts against the Chernoff cap.
Outcome criterion8() {
  const std::uint64_t T = 1000;
  const std::size_t np = 100, nm = 50;
  const double delta = 0.05;
  const double cap = chernoff_hit_bound(T, np, nm, delta);
  TaskConfig task = TaskConfig{}.with_sizes(np, nm);
  task.seed = 1008;
  const TripletDataset ds = gen_task(task).train;
  std::mt19937_64 slot_rng(derive_seed(1008, 1));
  std::uniform_int_distribution<std::size_t> slot(0, np + nm - 1);
  int exceed = 0;
  std::uint64_t max_hits = 0;
  for (int run = 0; run < 200; ++run) {
    SgdConfig cfg;
    cfg.T = T;
    cfg.seed = derive_seed(1008, 2, static_cast<std::uint64_t>(run));
    const SgdResult r = sgd_train(ds, cfg);
    const std::size_t s = slot(slot_rng);
    const SlotRef ref = s < np ? SlotRef{Pool::Positive, s} : SlotRef{Pool::Negative, s - np};
    const std::uint64_t hits = r.trace.indicator_hits(ref);
    max_hits = std::max(max_hits, hits);
    if (static_cast<double>(hits) > cap) ++exceed;
  }
  const double frac = exceed / 200.0;
  const double limit = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 200.0);
  return {frac <= limit, "runs=200 cap=" + num(cap) + " exceed_fraction=" + num(frac) + " limit=" + num(limit) +
                             " max_hits=" + std::to_string(max_hits)};
}

// 9. Deviation of R_S from R at a fixed w against the Bernstein bound.
Outcome criterion9() {
  const std::size_t np = 100, nm = 50;
  const double delta = 0.1;
  TaskConfig task = TaskConfig{}.with_sizes(np, nm);
  task.noise_scale = 0.4;
  task.seed = 1009;
  Matrix wm(2, 2);
  wm << 1.5, 0.3, 0.3, -0.5;
  const MetricParams w = MetricParams::from_matrix(wm);
  const LossConfig loss{0.0};

  TripletSampler moments = make_sampler(task, 5);
  const KernelMoments km = estimate_kernel_moments(w, moments, 1000000, loss);
  TripletSampler pop = make_sampler(task, 6);
  const RiskEstimate R = population_risk(w, pop, 4000000, loss);
  const double bound = bernstein_ustat_bound(km.b, km.tau, delta, np, nm);

  TripletSampler data = make_sampler(task, 7);
  int exceed = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const TripletDataset S = data.draw_dataset(np, nm);
    const double dev = std::abs(exact_empirical_risk(w, S, loss) - R.value);
    worst = std::max(worst, dev);
    if (dev > bound) ++exceed;
  }
  const double frac = exceed / 200.0;
  const double limit = 0.1 + 3.0 * std::sqrt(0.1 * 0.9 / 200.0);
  return {frac <= limit, "draws=200 bound=" + num(bound) + " (b=" + num(km.b) + ", tau=" + num(km.tau) +
                             ") max_dev=" + num(worst) + " exceed_fraction=" + num(frac) + " limit=" + num(limit) +
                             " R_stderr=" + num(R.std_error)};
}

std::string fit_report(const std::optional<SlopeFit>& fit, const std::string& err) {
  if (!fit) return "fit failed: " + err;
  return "slope=" + num(fit->slope) + " +- " + num(fit->slope_stderr) + " r2=" + num(fit->r_squared);
}

// 10. SGD generalization-gap exponent with T = n.
Outcome criterion10() {
  SweepConfig c;
  c.algorithm = Algorithm::Sgd;
  c.n_grid = {32, 64, 128, 256, 512};
  c.trials_per_n = 20;
  c.sgd_c = 1.0 / 32.0;
  c.zeta = 0.0;
  c.population_m = 100000;
  c.excess_proxy = false;
  c.task.d = 2;
  c.task.B = 1.0;
  c.task.separation = 0.0;
  c.task.noise_scale = 0.5;
  c.seed = 1010;
  const SweepReport r = run_rate_sweep(c);
  std::string cells;
  for (const auto& cell : r.cells) cells += " n=" + std::to_string(cell.n) + ":|gap|=" + num(cell.mean_abs_gap);
  const bool ok = r.fit && r.fit->slope >= -0.9 && r.fit->slope <= -0.25;
  return {ok, fit_report(r.fit, r.fit_error) + " band=[-0.9,-0.25];" + cells};
}

// 11. Low-noise RRM: mean gap under the optimistic bound, and a fast decay.
Outcome criterion11() {
  OptimisticConfig c;
  c.sweep.algorithm = Algorithm::Rrm;
  c.sweep.sigma_rule = SigmaRule::OptimisticSchedule;
  c.sweep.sigma0 = 8.0 * regularity_constants(1.0).alpha;
  c.sweep.n_grid = {32, 64, 128, 256};
  c.sweep.trials_per_n = 20;
  c.sweep.population_m = 100000;
  c.sweep.zeta = 0.0;
  c.sweep.task = low_noise_config(2, 1.6, 1.0);
  c.sweep.seed = 1011;
  c.control_variate = true;
  const OptimisticReport r = run_optimistic_experiment(c);
  std::string cells;
  for (const auto& cell : r.cells)
    cells += " n=" + std::to_string(cell.n) + ":gap=" + num(cell.mean_gap) + "+-" + num(cell.gap_std_error) +
             "/bound=" + num(cell.bound);
  const bool ok = r.violations == 0 && r.fit && r.fit->slope <= -0.7;
  return {ok, "violations=" + std::to_string(r.violations) + " " + fit_report(r.fit, r.fit_error) +
                  " threshold=-0.7;" + cells};
}

// 12. Closed-form evaluators against independently written hand expressions.
Outcome criterion12() {
  struct Case {
    const char* name;
    double got;
    double want;
  };
  const double e = std::numbers::e;
  const double lg20 = std::log(20.0);
  const std::vector<Case> cases{
      {"theorem1", theorem1_bound(101, 100, 0.0, 1.0, std::exp(-2.0)), e * 8.0 * (0.1 + 0.2) * std::sqrt(3.0)},
      {"rrm", rrm_stability_bound(100, 50, 8.0, 0.1), std::min(0.08, 0.08) * 640.0},
      {"lemma5", lemma5_M_bound(96, 48, 1.0, 1.0), 1.0},
      {"chernoff", chernoff_hit_bound(1000, 100, 50, 0.05), (1.0 + std::sqrt(3.0 * lg20 / 10.0)) * 20.0},
      {"bernstein", bernstein_ustat_bound(1.0, 0.25, 0.05, 100, 50),
       2.0 * (2.0 * lg20 / 150.0) + 2.0 * std::sqrt(0.25 * 2.0 * lg20 / 50.0)},
      {"theorem4", theorem4_optimistic_bound(10.0, 1.0, 1.0, 100, 100, 1.0),
       1.0 / 10.0 + 1536.0 * 11.0 / (1e4 * 99.0) + 256.0 * 11.0 / (3.0 * 99.0 * 1e4)},
  };
  // Rounded values as printed alongside the hand derivations.
  const std::vector<Case> printed{{"theorem1", cases[0].got, 11.2997}, {"chernoff", cases[3].got, 38.96},
                                  {"bernstein", cases[4].got, 0.42605}, {"theorem4", cases[5].got, 0.118015}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const double err = rel_err(c.got, c.want);
    if (!(err <= 1e-6)) ok = false;
    detail += " " + rel_report(c.name, c.got, c.want) + " rel_err=" + num(err);
  }
  for (const auto& c : printed) {
    // Printed values carry 4 to 6 significant digits.
    if (!(rel_err(c.got, c.want) <= 5e-5)) {
      ok = false;
      detail += " printed " + rel_report(c.name, c.got, c.want) + " MISMATCH";
    }
  }
  return {ok, detail.substr(1)};
}

// 13. Same seed, byte-identical CSV outputs from every experiment command.
Outcome criterion13(const std::string& cli, const fs::path& workdir) {
  if (cli.empty()) return {false, "needs --cli"};
  struct Cmd {
    std::string name;
    std::string args;
  };
  const std::vector<Cmd> cmds{
      {"gen", "gen --n-plus 20 --n-minus 15"},
      {"sgd", "sgd --n-plus 20 --n-minus 15 --T 300 --population-m 5000"},
      {"rrm", "rrm --n-plus 12 --n-minus 10 --lambda 0.1 --population-m 5000"},
      {"stability", "stability --trainer sgd --n-plus 10 --n-minus 10 --T 100 --trials 3 --probe-size 500"},
      {"stability_avg",
       "stability --trainer rrm --protocol on_average --n-plus 6 --n-minus 5 --trials 2 --triplet-subsample 5"},
      {"sweep", "sweep --algorithm sgd --n-grid 8 12 16 --trials-per-n 2 --population-m 2000"},
      {"excess", "excess --algorithm rrm --sigma0 1 --n-grid 6 8 10 --trials-per-n 2 --population-m 2000 "
                 "--bernstein-samples 5000"},
      {"optimistic", "optimistic --sigma-rule optimistic --sigma0 512 --n-grid 8 12 16 --trials-per-n 2 "
                     "--population-m 2000 --separation 1.6 --noise-scale 0.016"},
  };
  fs::remove_all(workdir);
  std::string detail;
  bool ok = true;
  std::uint64_t files = 0;
  for (const auto& c : cmds) {
    const fs::path a = workdir / c.name / "a";
    const fs::path b = workdir / c.name / "b";
    for (const auto& dir : {a, b}) {
      const std::string line = "\"" + cli + "\" --out \"" + dir.string() + "\" " + c.args + " --seed 1013";
      const int rc = std::system(line.c_str());
      if (rc != 0) {
        ok = false;
        detail += " " + c.name + ":exit=" + std::to_string(rc);
      }
    }
    std::vector<fs::path> csvs;
    if (fs::exists(a))
      for (const auto& entry : fs::directory_iterator(a))
        if (entry.path().extension() == ".csv") csvs.push_back(entry.path().filename());
    if (csvs.empty()) {
      ok = false;
      detail += " " + c.name + ":no_csv";
    }
    for (const auto& name : csvs) {
      auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
      };
      ++files;
      if (!fs::exists(b / name) || slurp(a / name) != slurp(b / name)) {
        ok = false;
        detail += " " + c.name + "/" + name.string() + ":differs";
      }
    }
  }
  return {ok, "commands=" + std::to_string(cmds.size()) + " csv_files_compared=" + std::to_string(files) +
                  (detail.empty() ? std::string(" all identical") : detail)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  std::string cli;
  std::string workdir = (fs::temp_directory_path() / "tripstab_determinism").string();
  app.add_option("--criterion", only, "criterion number (default: 1-12, plus 13 when --cli is given)");
  app.add_option("--cli", cli, "path to the tripstab_cli binary");
  app.add_option("--workdir", workdir, "scratch directory for criterion 13");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> table{
      criterion1, criterion2,  criterion3,  criterion4, criterion5, criterion6, criterion7,
      criterion8, criterion9, criterion10, criterion11, criterion12,
      [&] { return criterion13(cli, workdir); }};

  std::vector<int> run;
  if (only > 0) {
    if (only > static_cast<int>(table.size())) {
      std::cerr << "no criterion " << only << '\n';
      return 2;
    }
    run.push_back(only);
  } else {
    for (int c = 1; c <= 12; ++c) run.push_back(c);
    if (!cli.empty()) run.push_back(13);
  }

  int failures = 0;
  for (const int c : run) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = table[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << " [" << num(secs) << " s] " << o.detail
              << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
