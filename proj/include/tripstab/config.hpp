#pragma once

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>

#include "tripstab/error.hpp"
#include "tripstab/lab.hpp"
#include "tripstab/optim.hpp"
#include "tripstab/stability.hpp"
#include "tripstab/synth.hpp"

// JSON mirrors of the configuration structs. Unknown keys are rejected so a
// typo never silently falls back to a default.

namespace tripstab {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* section) {
  require(j.is_object(), Errc::InvalidConfig, std::string(section) + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    require(allowed.count(k) > 0, Errc::InvalidConfig, std::string("unknown key '") + k + "' in " + section);
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw Error(Errc::InvalidConfig, std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace detail

inline Algorithm parse_algorithm(const std::string& s) {
  return detail::parse_enum<Algorithm>(
      s, {{"sgd", Algorithm::Sgd}, {"rrm", Algorithm::Rrm}, {"constant", Algorithm::Constant}}, "algorithm");
}

inline SigmaRule parse_sigma_rule(const std::string& s) {
  return detail::parse_enum<SigmaRule>(s,
                                       {{"inv_sqrt_n", SigmaRule::InvSqrtN},
                                        {"optimistic", SigmaRule::OptimisticSchedule},
                                        {"constant", SigmaRule::Constant}},
                                       "sigma rule");
}

inline RrmSolver parse_solver(const std::string& s) {
  return detail::parse_enum<RrmSolver>(s, {{"newton", RrmSolver::Newton}, {"gd", RrmSolver::GradientDescent}},
                                       "solver");
}

// --- TaskConfig ---------------------------------------------------------------

inline void to_json(Json& j, const TaskConfig& c) {
  j = Json{{"d", c.d},         {"n_plus", c.n_plus},         {"n_minus", c.n_minus},
           {"B", c.B},         {"separation", c.separation}, {"noise_scale", c.noise_scale},
           {"seed", c.seed}};
}

inline void from_json(const Json& j, TaskConfig& c) {
  detail::reject_unknown(j, {"d", "n_plus", "n_minus", "B", "separation", "noise_scale", "seed"}, "task");
  detail::read_opt(j, "d", c.d);
  detail::read_opt(j, "n_plus", c.n_plus);
  detail::read_opt(j, "n_minus", c.n_minus);
  detail::read_opt(j, "B", c.B);
  detail::read_opt(j, "separation", c.separation);
  detail::read_opt(j, "noise_scale", c.noise_scale);
  detail::read_opt(j, "seed", c.seed);
}

// --- SgdConfig ------------------------------------------------------------------

inline void to_json(Json& j, const SgdConfig& c) {
  j = Json{{"T", c.T}, {"seed", c.seed}, {"zeta", c.zeta}};
  j["c"] = c.c ? Json(*c.c) : Json(nullptr);
}

inline void from_json(const Json& j, SgdConfig& c) {
  detail::reject_unknown(j, {"T", "c", "seed", "zeta"}, "sgd");
  detail::read_opt(j, "T", c.T);
  if (j.contains("c") && !j.at("c").is_null()) c.c = j.at("c").get<double>();
  detail::read_opt(j, "seed", c.seed);
  detail::read_opt(j, "zeta", c.zeta);
}

// --- RrmConfig ------------------------------------------------------------------

inline void to_json(Json& j, const RrmConfig& c) {
  j = Json{{"lambda", c.lambda},
           {"tol", c.tol},
           {"max_iters", c.max_iters},
           {"zeta", c.zeta},
           {"solver", std::string(to_string(c.solver))},
           {"triplet_budget", c.triplet_budget}};
}

inline void from_json(const Json& j, RrmConfig& c) {
  detail::reject_unknown(j, {"lambda", "tol", "max_iters", "zeta", "solver", "triplet_budget"}, "rrm");
  detail::read_opt(j, "lambda", c.lambda);
  detail::read_opt(j, "tol", c.tol);
  detail::read_opt(j, "max_iters", c.max_iters);
  detail::read_opt(j, "zeta", c.zeta);
  if (j.contains("solver")) c.solver = parse_solver(j.at("solver").get<std::string>());
  detail::read_opt(j, "triplet_budget", c.triplet_budget);
}

// --- SweepConfig ------------------------------------------------------------------

inline void to_json(Json& j, const SweepConfig& c) {
  j = Json{{"algorithm", std::string(to_string(c.algorithm))},
           {"n_grid", c.n_grid},
           {"trials_per_n", c.trials_per_n},
           {"sigma_rule", std::string(to_string(c.sigma_rule))},
           {"sigma0", c.sigma0},
           {"zeta", c.zeta},
           {"rrm_tol", c.rrm_tol},
           {"population_m", c.population_m},
           {"excess_proxy", c.excess_proxy},
           {"proxy_factor", c.proxy_factor},
           {"proxy_triplets", c.proxy_triplets},
           {"proxy_lambda", c.proxy_lambda},
           {"task", c.task},
           {"seed", c.seed}};
  j["sgd_c"] = c.sgd_c ? Json(*c.sgd_c) : Json(nullptr);
}

inline void from_json(const Json& j, SweepConfig& c) {
  detail::reject_unknown(j,
                         {"algorithm", "n_grid", "trials_per_n", "sigma_rule", "sigma0", "sgd_c", "zeta", "rrm_tol",
                          "population_m", "excess_proxy", "proxy_factor", "proxy_triplets", "proxy_lambda", "task",
                          "seed"},
                         "sweep");
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  detail::read_opt(j, "n_grid", c.n_grid);
  detail::read_opt(j, "trials_per_n", c.trials_per_n);
  if (j.contains("sigma_rule")) c.sigma_rule = parse_sigma_rule(j.at("sigma_rule").get<std::string>());
  detail::read_opt(j, "sigma0", c.sigma0);
  if (j.contains("sgd_c") && !j.at("sgd_c").is_null()) c.sgd_c = j.at("sgd_c").get<double>();
  detail::read_opt(j, "zeta", c.zeta);
  detail::read_opt(j, "rrm_tol", c.rrm_tol);
  detail::read_opt(j, "population_m", c.population_m);
  detail::read_opt(j, "excess_proxy", c.excess_proxy);
  detail::read_opt(j, "proxy_factor", c.proxy_factor);
  detail::read_opt(j, "proxy_triplets", c.proxy_triplets);
  detail::read_opt(j, "proxy_lambda", c.proxy_lambda);
  if (j.contains("task")) from_json(j.at("task"), c.task);
  detail::read_opt(j, "seed", c.seed);
}

// --- Stability run ------------------------------------------------------------------

struct StabilityRunConfig {
  std::string trainer = "rrm";  // sgd | rrm | constant
  StabilityProtocol protocol = StabilityProtocol::UniformSup;
  Replacement replacement = Replacement::Single;
  std::uint64_t trials = 10;
  std::uint64_t probe_size = 10000;
  std::uint64_t triplet_subsample = 20;
  bool include_training_triplets = true;
  bool warm_start = true;
  double zeta = 0.0;
};

inline void to_json(Json& j, const StabilityRunConfig& c) {
  j = Json{{"trainer", c.trainer},
           {"protocol", std::string(to_string(c.protocol))},
           {"replacement", c.replacement == Replacement::Single ? "single" : "triple"},
           {"trials", c.trials},
           {"probe_size", c.probe_size},
           {"triplet_subsample", c.triplet_subsample},
           {"include_training_triplets", c.include_training_triplets},
           {"warm_start", c.warm_start},
           {"zeta", c.zeta}};
}

inline void from_json(const Json& j, StabilityRunConfig& c) {
  detail::reject_unknown(j,
                         {"trainer", "protocol", "replacement", "trials", "probe_size", "triplet_subsample",
                          "include_training_triplets", "warm_start", "zeta"},
                         "stability");
  detail::read_opt(j, "trainer", c.trainer);
  if (j.contains("protocol"))
    c.protocol = detail::parse_enum<StabilityProtocol>(
        j.at("protocol").get<std::string>(),
        {{"uniform", StabilityProtocol::UniformSup}, {"on_average", StabilityProtocol::OnAverage}}, "protocol");
  if (j.contains("replacement"))
    c.replacement = detail::parse_enum<Replacement>(j.at("replacement").get<std::string>(),
                                                    {{"single", Replacement::Single}, {"triple", Replacement::Triple}},
                                                    "replacement");
  detail::read_opt(j, "trials", c.trials);
  detail::read_opt(j, "probe_size", c.probe_size);
  detail::read_opt(j, "triplet_subsample", c.triplet_subsample);
  detail::read_opt(j, "include_training_triplets", c.include_training_triplets);
  detail::read_opt(j, "warm_start", c.warm_start);
  detail::read_opt(j, "zeta", c.zeta);
}

// --- Top-level lab file ------------------------------------------------------------------

/// Whole configuration document. Every section is optional.
struct LabConfig {
  TaskConfig task;
  SgdConfig sgd;
  RrmConfig rrm;
  SweepConfig sweep;
  StabilityRunConfig stability;
  double bernstein_delta = 0.1;
  std::uint64_t bernstein_samples = 1000000;
  bool control_variate = true;
  std::optional<std::uint64_t> seed;
};

inline void to_json(Json& j, const LabConfig& c) {
  j = Json{{"task", c.task},
           {"sgd", c.sgd},
           {"rrm", c.rrm},
           {"sweep", c.sweep},
           {"stability", c.stability},
           {"bernstein_delta", c.bernstein_delta},
           {"bernstein_samples", c.bernstein_samples},
           {"control_variate", c.control_variate}};
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
}

inline void from_json(const Json& j, LabConfig& c) {
  detail::reject_unknown(j,
                         {"task", "sgd", "rrm", "sweep", "stability", "bernstein_delta", "bernstein_samples",
                          "control_variate", "seed"},
                         "config");
  if (j.contains("task")) from_json(j.at("task"), c.task);
  if (j.contains("sgd")) from_json(j.at("sgd"), c.sgd);
  if (j.contains("rrm")) from_json(j.at("rrm"), c.rrm);
  if (j.contains("sweep")) from_json(j.at("sweep"), c.sweep);
  if (j.contains("stability")) from_json(j.at("stability"), c.stability);
  detail::read_opt(j, "bernstein_delta", c.bernstein_delta);
  detail::read_opt(j, "bernstein_samples", c.bernstein_samples);
  detail::read_opt(j, "control_variate", c.control_variate);
  if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
}

inline LabConfig load_lab_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::Io, "cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, "config file " + path + ": " + e.what());
  }
  LabConfig c;
  from_json(j, c);
  return c;
}

}  // namespace tripstab
