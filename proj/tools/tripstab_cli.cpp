// Command-line front end: dataset generation, training, stability estimation,
// rate sweeps, property checks and closed-form bounds.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tripstab/tripstab.hpp"

namespace fs = std::filesystem;
using namespace tripstab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBound = 3;
constexpr int kExitRegime = 4;

/// A flag whose value is copied into the configuration only when given on the command line.
template <class T>
struct Override {
  T value{};
  CLI::Option* opt = nullptr;

  void add(CLI::App* app, const std::string& name, const std::string& help) { opt = app->add_option(name, value, help); }
  void apply(T& dst) const {
    if (opt && opt->count() > 0) dst = value;
  }
  void apply(std::optional<T>& dst) const {
    if (opt && opt->count() > 0) dst = value;
  }
  bool given() const { return opt && opt->count() > 0; }
};

struct TaskFlags {
  Override<std::size_t> d, n_plus, n_minus;
  Override<double> B, separation, noise_scale;

  void add(CLI::App* app) {
    d.add(app, "--d", "feature dimension");
    n_plus.add(app, "--n-plus", "number of positive samples");
    n_minus.add(app, "--n-minus", "number of negative samples");
    B.add(app, "--B", "feature bound");
    separation.add(app, "--separation", "distance between the pool means");
    noise_scale.add(app, "--noise-scale", "within-pool spread");
  }
  void apply(TaskConfig& t) const {
    d.apply(t.d);
    n_plus.apply(t.n_plus);
    n_minus.apply(t.n_minus);
    B.apply(t.B);
    separation.apply(t.separation);
    noise_scale.apply(t.noise_scale);
  }
};

struct SgdFlags {
  Override<std::uint64_t> T;
  Override<double> c, zeta;
  void add(CLI::App* app) {
    T.add(app, "--T", "number of SGD steps");
    c.add(app, "--c", "step factor, eta = c / sqrt(T)");
    zeta.add(app, "--zeta", "margin");
  }
  void apply(SgdConfig& s) const {
    T.apply(s.T);
    c.apply(s.c);
    zeta.apply(s.zeta);
  }
};

struct RrmFlags {
  Override<double> lambda, tol, zeta;
  Override<std::uint64_t> max_iters;
  Override<std::string> solver;
  void add(CLI::App* app, bool with_zeta) {
    lambda.add(app, "--lambda", "ridge weight");
    tol.add(app, "--tol", "gradient-norm tolerance");
    max_iters.add(app, "--max-iters", "iteration cap");
    solver.add(app, "--solver", "newton or gd");
    if (with_zeta) zeta.add(app, "--zeta", "margin");
  }
  void apply(RrmConfig& r) const {
    lambda.apply(r.lambda);
    tol.apply(r.tol);
    zeta.apply(r.zeta);
    max_iters.apply(r.max_iters);
    if (solver.given()) r.solver = parse_solver(solver.value);
  }
};

struct SweepFlags {
  Override<std::string> algorithm, sigma_rule;
  Override<std::vector<std::size_t>> n_grid;
  Override<std::uint64_t> trials_per_n, population_m;
  Override<double> sigma0, sgd_c, zeta;
  bool no_proxy = false;
  void add(CLI::App* app) {
    algorithm.add(app, "--algorithm", "sgd, rrm or constant");
    n_grid.add(app, "--n-grid", "pool sizes n (n_plus = n_minus = n)");
    trials_per_n.add(app, "--trials-per-n", "trials per grid point");
    sigma_rule.add(app, "--sigma-rule", "inv_sqrt_n, optimistic or constant");
    sigma0.add(app, "--sigma0", "scale of the sigma schedule");
    sgd_c.add(app, "--sgd-c", "SGD step factor");
    zeta.add(app, "--zeta", "margin");
    population_m.add(app, "--population-m", "fresh triplets per population estimate");
    app->add_flag("--no-excess-proxy", no_proxy, "skip the excess-risk reference");
  }
  void apply(SweepConfig& s) const {
    if (algorithm.given()) s.algorithm = parse_algorithm(algorithm.value);
    if (sigma_rule.given()) s.sigma_rule = parse_sigma_rule(sigma_rule.value);
    n_grid.apply(s.n_grid);
    trials_per_n.apply(s.trials_per_n);
    population_m.apply(s.population_m);
    sigma0.apply(s.sigma0);
    sgd_c.apply(s.sgd_c);
    zeta.apply(s.zeta);
    if (no_proxy) s.excess_proxy = false;
  }
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  require(static_cast<bool>(f), Errc::Io, "cannot write " + p.string());
  return f;
}

struct RunContext {
  std::string command;
  fs::path out_dir = ".";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  fs::path file(const std::string& name) {
    fs::create_directories(out_dir);
    outputs.push_back(name);
    return out_dir / name;
  }

  void manifest(const Json& config) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json m{{"command", command},
           {"library_version", std::string(kLibraryVersion)},
           {"config", config},
           {"outputs", outputs},
           {"wall_time_seconds", wall}};
    m["seed"] = seed ? Json(*seed) : Json(nullptr);
    m["config_file"] = config_path.empty() ? Json(nullptr) : Json(config_path);
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "manifest.json");
    f << m.dump(2) << '\n';
  }
};

TripletDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::Io, "cannot open dataset " + path);
  return read_dataset_csv(in);
}

void write_risk_row(std::ostream& out, const RiskEstimate& r) {
  out << to_string(r.mode) << ',' << detail::format_double(r.value) << ',' << detail::format_double(r.std_error)
      << ',' << r.n_terms;
}

void print_checks(const std::vector<CheckResult>& results, std::ostream& out) {
  out << "suite,probes,violations,worst,limit\n";
  for (const auto& r : results)
    out << r.name << ',' << r.probes << ',' << r.violations << ',' << detail::format_double(r.worst) << ','
        << detail::format_double(r.limit) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triplet learning: training, stability estimation and rate experiments"};
  app.require_subcommand(1);

  RunContext ctx;
  std::uint64_t seed_value = 0;
  std::string out_dir = ".";
  app.add_option("--config", ctx.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");

  auto add_seed = [&](CLI::App* sub, bool mandatory) {
    auto* o = sub->add_option("--seed", seed_value, "64-bit seed");
    if (mandatory) o->required();
    return o;
  };

  // gen
  auto* gen = app.add_subcommand("gen", "generate a dataset CSV from a task configuration");
  TaskFlags gen_task_flags;
  gen_task_flags.add(gen);
  auto* gen_seed = add_seed(gen, true);

  // sgd
  auto* sgd = app.add_subcommand("sgd", "train with SGD");
  TaskFlags sgd_task_flags;
  SgdFlags sgd_flags;
  std::string sgd_data;
  std::uint64_t sgd_m = 100000;
  sgd_task_flags.add(sgd);
  sgd_flags.add(sgd);
  sgd->add_option("--data", sgd_data, "training set CSV (default: generate from the task)");
  sgd->add_option("--population-m", sgd_m, "fresh triplets for the population risk");
  auto* sgd_seed = add_seed(sgd, true);

  // rrm
  auto* rrm = app.add_subcommand("rrm", "train by regularized risk minimization");
  TaskFlags rrm_task_flags;
  RrmFlags rrm_flags;
  std::string rrm_data;
  std::uint64_t rrm_m = 100000;
  rrm_task_flags.add(rrm);
  rrm_flags.add(rrm, true);
  rrm->add_option("--data", rrm_data, "training set CSV (default: generate from the task)");
  rrm->add_option("--population-m", rrm_m, "fresh triplets for the population risk");
  auto* rrm_seed = add_seed(rrm, false);

  // stability
  auto* stab = app.add_subcommand("stability", "estimate uniform or on-average stability");
  TaskFlags stab_task_flags;
  SgdFlags stab_sgd_flags;
  RrmFlags stab_rrm_flags;
  Override<std::string> stab_trainer, stab_protocol, stab_replacement;
  Override<std::uint64_t> stab_trials, stab_probe, stab_subsample;
  stab_task_flags.add(stab);
  stab_sgd_flags.add(stab);
  stab_rrm_flags.add(stab, false);
  stab_trainer.add(stab, "--trainer", "sgd, rrm or constant");
  stab_protocol.add(stab, "--protocol", "uniform or on_average");
  stab_replacement.add(stab, "--replacement", "single or triple");
  stab_trials.add(stab, "--trials", "number of trials");
  stab_probe.add(stab, "--probe-size", "fresh probe triplets per trial");
  stab_subsample.add(stab, "--triplet-subsample", "sampled (i, j, k) per trial for on_average");
  auto* stab_seed = add_seed(stab, true);

  // sweep / excess / optimistic
  auto* sweep = app.add_subcommand("sweep", "generalization-gap rate sweep");
  auto* excess = app.add_subcommand("excess", "excess-risk decomposition");
  auto* optim = app.add_subcommand("optimistic", "low-noise RRM regime against the optimistic bound");
  TaskFlags sweep_task_flags, excess_task_flags, optim_task_flags;
  SweepFlags sweep_flags, excess_flags, optim_flags;
  Override<double> bern_delta;
  Override<std::uint64_t> bern_samples;
  bool no_cv = false;
  for (auto [sub, tf, sf] : {std::tuple{sweep, &sweep_task_flags, &sweep_flags},
                             std::tuple{excess, &excess_task_flags, &excess_flags},
                             std::tuple{optim, &optim_task_flags, &optim_flags}}) {
    tf->add(sub);
    sf->add(sub);
    add_seed(sub, true);
  }
  bern_delta.add(excess, "--bernstein-delta", "confidence parameter of the deviation bound");
  bern_samples.add(excess, "--bernstein-samples", "fresh triplets for the kernel range and variance");
  optim->add_flag("--no-control-variate", no_cv, "report the raw gap without the reference correction");

  // check
  auto* check = app.add_subcommand("check", "randomized property suites for the loss");
  CheckOptions check_opt;
  check->add_option("--probes", check_opt.probes, "probes per suite");
  check->add_option("--B", check_opt.B, "feature bound");
  check->add_option("--d", check_opt.d, "dimension");
  add_seed(check, false);

  // bounds
  auto* bounds = app.add_subcommand("bounds", "evaluate a closed-form bound");
  std::string kind;
  std::size_t b_np = 100, b_nm = 50;
  double b_L = 8.0, b_sigma = 1.0, b_gamma = 0.0, b_M = 1.0, b_delta = 0.05, b_b = 1.0, b_tau = 0.25, b_eps = 0.0,
         b_alpha = 64.0, b_risk = 1.0, b_eta = 0.01;
  std::uint64_t b_T = 1000, b_hits = 0;
  bounds->add_option("--kind", kind, "theorem1, rrm, lemma5, chernoff, bernstein, theorem4, sgd")->required();
  bounds->add_option("--n-plus", b_np);
  bounds->add_option("--n-minus", b_nm);
  bounds->add_option("--L", b_L);
  bounds->add_option("--sigma", b_sigma);
  bounds->add_option("--gamma", b_gamma);
  bounds->add_option("--M", b_M);
  bounds->add_option("--delta", b_delta);
  bounds->add_option("--b", b_b);
  bounds->add_option("--tau", b_tau);
  bounds->add_option("--epsilon", b_eps, "epsilon for theorem4 (default: the balancing choice)");
  bounds->add_option("--alpha", b_alpha);
  bounds->add_option("--risk", b_risk, "mean empirical risk for theorem4");
  bounds->add_option("--T", b_T);
  bounds->add_option("--eta", b_eta, "constant step size for sgd");
  bounds->add_option("--hits", b_hits, "steps touching the slot for sgd");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ctx.out_dir = out_dir;
    LabConfig lab = ctx.config_path.empty() ? LabConfig{} : load_lab_config(ctx.config_path);
    auto seed_given = [&](CLI::Option* o) { return o && o->count() > 0; };
    (void)gen_seed;
    (void)sgd_seed;
    (void)stab_seed;

    if (gen->parsed()) {
      ctx.command = "gen";
      ctx.seed = seed_value;
      gen_task_flags.apply(lab.task);
      lab.task.seed = seed_value;
      const Task t = gen_task(lab.task);
      auto f = open_out(ctx.file("dataset.csv"));
      write_dataset_csv(f, t.train);
      ctx.manifest(Json{{"task", lab.task}});
      return kExitOk;
    }

    if (sgd->parsed()) {
      ctx.command = "sgd";
      ctx.seed = seed_value;
      sgd_task_flags.apply(lab.task);
      sgd_flags.apply(lab.sgd);
      lab.task.seed = seed_value;
      lab.sgd.seed = seed_value;
      std::optional<TripletSampler> sampler;
      TripletDataset ds = [&] {
        if (!sgd_data.empty()) return load_dataset(sgd_data);
        Task t = gen_task(lab.task);
        sampler.emplace(std::move(t.sampler));
        return std::move(t.train);
      }();
      const SgdResult r = sgd_train(ds, lab.sgd);
      {
        auto f = open_out(ctx.file("model.csv"));
        write_metric_csv(f, r.w);
      }
      {
        auto f = open_out(ctx.file("trace.csv"));
        write_trace_csv(f, r.trace);
      }
      auto f = open_out(ctx.file("metrics.csv"));
      f << "c,T,empirical_mode,empirical_risk,empirical_std_error,empirical_terms,population_mode,population_risk,"
           "population_std_error,population_terms\n";
      f << detail::format_double(r.c) << ',' << lab.sgd.T << ',';
      write_risk_row(f, empirical_risk(r.w, ds, lab.sgd.loss()));
      f << ',';
      if (sampler) {
        write_risk_row(f, population_risk(r.w, *sampler, sgd_m, lab.sgd.loss()));
      } else {
        f << ",,,";
      }
      f << '\n';
      ctx.manifest(Json{{"task", lab.task}, {"sgd", lab.sgd}, {"data", sgd_data}});
      return kExitOk;
    }

    if (rrm->parsed()) {
      ctx.command = "rrm";
      rrm_task_flags.apply(lab.task);
      rrm_flags.apply(lab.rrm);
      std::optional<TripletSampler> sampler;
      if (rrm_data.empty()) {
        require(seed_given(rrm_seed), Errc::InvalidConfig, "--seed is required when the dataset is generated");
        ctx.seed = seed_value;
        lab.task.seed = seed_value;
      }
      TripletDataset ds = [&] {
        if (!rrm_data.empty()) return load_dataset(rrm_data);
        Task t = gen_task(lab.task);
        sampler.emplace(std::move(t.sampler));
        return std::move(t.train);
      }();
      const RrmResult r = rrm_train(ds, lab.rrm);
      {
        auto f = open_out(ctx.file("model.csv"));
        write_metric_csv(f, r.w);
      }
      auto f = open_out(ctx.file("metrics.csv"));
      f << "lambda,iterations,converged,grad_norm,objective,empirical_mode,empirical_risk,empirical_std_error,"
           "empirical_terms,population_mode,population_risk,population_std_error,population_terms\n";
      f << detail::format_double(lab.rrm.lambda) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
        << detail::format_double(r.grad_norm) << ',' << detail::format_double(r.objective) << ',';
      write_risk_row(f, empirical_risk(r.w, ds, lab.rrm.loss()));
      f << ',';
      if (sampler) {
        write_risk_row(f, population_risk(r.w, *sampler, rrm_m, lab.rrm.loss()));
      } else {
        f << ",,,";
      }
      f << '\n';
      ctx.manifest(Json{{"task", lab.task}, {"rrm", lab.rrm}, {"data", rrm_data}});
      return r.converged ? kExitOk : kExitConfig;
    }

    if (stab->parsed()) {
      ctx.command = "stability";
      ctx.seed = seed_value;
      stab_task_flags.apply(lab.task);
      stab_sgd_flags.apply(lab.sgd);
      stab_rrm_flags.apply(lab.rrm);
      auto& sc = lab.stability;
      stab_trainer.apply(sc.trainer);
      if (stab_protocol.given()) {
        Json j{{"protocol", stab_protocol.value}};
        StabilityRunConfig tmp;
        from_json(j, tmp);
        sc.protocol = tmp.protocol;
      }
      if (stab_replacement.given()) {
        Json j{{"replacement", stab_replacement.value}};
        StabilityRunConfig tmp;
        from_json(j, tmp);
        sc.replacement = tmp.replacement;
      }
      stab_trials.apply(sc.trials);
      stab_probe.apply(sc.probe_size);
      stab_subsample.apply(sc.triplet_subsample);
      lab.sgd.seed = seed_value;
      if (stab_sgd_flags.zeta.given()) lab.rrm.zeta = lab.sgd.zeta;

      Trainer trainer = MetricParams::zero(lab.task.d);
      if (sc.trainer == "sgd") {
        trainer = lab.sgd;
      } else if (sc.trainer == "rrm") {
        trainer = lab.rrm;
      } else {
        require(sc.trainer == "constant", Errc::InvalidConfig, "unknown trainer '" + sc.trainer + "'");
      }
      StabilityOptions opt;
      opt.replacement = sc.replacement;
      opt.zeta = sc.zeta;
      opt.include_training_triplets = sc.include_training_triplets;
      opt.warm_start = sc.warm_start;
      opt.seed = seed_value;
      const StabilityReport rep = sc.protocol == StabilityProtocol::UniformSup
                                      ? estimate_uniform_stability(trainer, lab.task, sc.trials, sc.probe_size, opt)
                                      : estimate_on_average_stability(trainer, lab.task, sc.trials, sc.triplet_subsample, opt);
      {
        auto f = open_out(ctx.file("stability.csv"));
        write_stability_csv_header(f);
        write_stability_csv_row(f, rep);
      }
      {
        auto f = open_out(ctx.file("stability_trials.csv"));
        f << "trial,slots,value,bound,M_hat,probe_points\n";
        for (const auto& t : rep.records) {
          f << t.trial << ',';
          for (std::size_t s = 0; s < t.slots.size(); ++s)
            f << (s ? ";" : "") << to_string(t.slots[s].pool) << ':' << t.slots[s].index;
          f << ',' << detail::format_double(t.value) << ','
            << (t.bound ? detail::format_double(*t.bound) : std::string()) << ',' << detail::format_double(t.M_hat)
            << ',' << t.probe_points << '\n';
        }
      }
      if (rep.protocol == StabilityProtocol::OnAverage) {
        auto f = open_out(ctx.file("on_average.csv"));
        f << "signed_mean,abs_mean,std_error\n"
          << detail::format_double(rep.signed_mean) << ',' << detail::format_double(rep.abs_mean) << ','
          << detail::format_double(rep.std_error) << '\n';
      }
      ctx.manifest(Json{{"task", lab.task}, {"sgd", lab.sgd}, {"rrm", lab.rrm}, {"stability", sc}});
      if (rep.violations > 0) {
        std::cerr << "bound violated in " << rep.violations << " of " << rep.trials << " trials\n";
        return kExitBound;
      }
      return kExitOk;
    }

    if (sweep->parsed() || excess->parsed() || optim->parsed()) {
      TaskFlags& tf = sweep->parsed() ? sweep_task_flags : excess->parsed() ? excess_task_flags : optim_task_flags;
      SweepFlags& sf = sweep->parsed() ? sweep_flags : excess->parsed() ? excess_flags : optim_flags;
      ctx.seed = seed_value;
      tf.apply(lab.sweep.task);
      sf.apply(lab.sweep);
      lab.sweep.seed = seed_value;
      lab.sweep.task.seed = seed_value;

      if (sweep->parsed()) {
        ctx.command = "sweep";
        const SweepReport rep = run_rate_sweep(lab.sweep);
        {
          auto f = open_out(ctx.file("sweep_rows.csv"));
          write_sweep_rows_csv(f, rep);
        }
        {
          auto f = open_out(ctx.file("sweep_cells.csv"));
          write_sweep_cells_csv(f, rep);
        }
        auto f = open_out(ctx.file("sweep_fit.csv"));
        write_fit_csv(f, rep.fit, rep.fit_error);
        ctx.manifest(Json{{"sweep", lab.sweep}});
        return kExitOk;
      }
      if (excess->parsed()) {
        ctx.command = "excess";
        bern_delta.apply(lab.bernstein_delta);
        bern_samples.apply(lab.bernstein_samples);
        ExcessConfig ec{lab.sweep, lab.bernstein_delta, lab.bernstein_samples};
        const ExcessReport rep = run_excess_risk_experiment(ec);
        auto f = open_out(ctx.file("excess.csv"));
        write_excess_csv(f, rep);
        ctx.manifest(Json{{"sweep", lab.sweep},
                          {"bernstein_delta", lab.bernstein_delta},
                          {"bernstein_samples", lab.bernstein_samples}});
        return kExitOk;
      }
      ctx.command = "optimistic";
      if (no_cv) lab.control_variate = false;
      if (!sf.algorithm.given() && ctx.config_path.empty()) lab.sweep.algorithm = Algorithm::Rrm;
      OptimisticConfig oc{lab.sweep, lab.control_variate};
      const OptimisticReport rep = run_optimistic_experiment(oc);
      {
        auto f = open_out(ctx.file("optimistic_rows.csv"));
        write_optimistic_rows_csv(f, rep);
      }
      {
        auto f = open_out(ctx.file("optimistic_cells.csv"));
        write_optimistic_cells_csv(f, rep);
      }
      {
        auto f = open_out(ctx.file("optimistic_fit.csv"));
        write_fit_csv(f, rep.fit, rep.fit_error);
      }
      ctx.manifest(Json{{"sweep", lab.sweep}, {"control_variate", lab.control_variate}});
      if (rep.violations > 0) {
        std::cerr << "optimistic bound violated in " << rep.violations << " cells\n";
        return kExitBound;
      }
      return kExitOk;
    }

    if (check->parsed()) {
      ctx.command = "check";
      check_opt.seed = seed_value;
      const auto results = run_property_checks(check_opt);
      print_checks(results, std::cout);
      std::uint64_t bad = 0;
      for (const auto& r : results) bad += r.violations;
      return bad ? kExitBound : kExitOk;
    }

    if (bounds->parsed()) {
      double v = 0.0;
      if (kind == "theorem1") {
        v = theorem1_bound(b_np, b_nm, b_gamma, b_M, b_delta);
      } else if (kind == "rrm") {
        v = rrm_stability_bound(b_np, b_nm, b_L, b_sigma);
      } else if (kind == "lemma5") {
        v = lemma5_M_bound(b_np, b_nm, b_L, b_sigma);
      } else if (kind == "chernoff") {
        v = chernoff_hit_bound(b_T, b_np, b_nm, b_delta);
      } else if (kind == "bernstein") {
        v = bernstein_ustat_bound(b_b, b_tau, b_delta, b_np, b_nm);
      } else if (kind == "theorem4") {
        const double eps = b_eps > 0.0 ? b_eps : balanced_epsilon(b_np, b_nm, b_sigma);
        v = theorem4_optimistic_bound(eps, b_alpha, b_sigma, b_np, b_nm, b_risk);
      } else if (kind == "sgd") {
        v = 2.0 * b_L * b_L * b_eta * static_cast<double>(b_hits);
      } else {
        throw Error(Errc::InvalidConfig, "unknown bound kind '" + kind + "'");
      }
      std::cout << detail::format_double(v) << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::RegimeViolation ? kExitRegime : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
