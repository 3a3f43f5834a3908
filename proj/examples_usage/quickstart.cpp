// Train SGD and RRM on a small synthetic task, report the generalization gap
// of each, and compare the measured RRM stability with its closed-form bound.

#include <iostream>

#include "tripstab/tripstab.hpp"

int main() {
  using namespace tripstab;

  TaskConfig task;
  task.n_plus = 40;
  task.n_minus = 40;
  task.noise_scale = 0.4;
  task.seed = 7;
  Task t = gen_task(task);
  const LossConfig loss{0.0};

  SgdConfig sgd;
  sgd.T = 2000;
  sgd.seed = 1;
  const SgdResult s = sgd_train(t.train, sgd);
  const GapEstimate sgap = generalization_gap(s.w, t.train, t.sampler, 100000, loss);
  std::cout << "sgd: R_S=" << sgap.empirical.value << " R=" << sgap.population.value << " gap=" << sgap.gap
            << " +- " << sgap.std_error << '\n';

  RrmConfig rrm;
  rrm.lambda = 0.05;
  const RrmResult r = rrm_train(t.train, rrm);
  const GapEstimate rgap = generalization_gap(r.w, t.train, t.sampler, 100000, loss);
  std::cout << "rrm: iterations=" << r.iterations << " grad_norm=" << r.grad_norm << " R_S=" << rgap.empirical.value
            << " R=" << rgap.population.value << " gap=" << rgap.gap << '\n';

  StabilityOptions opt;
  opt.seed = 3;
  const StabilityReport rep = estimate_uniform_stability(rrm, task, 5, 5000, opt);
  std::cout << "rrm stability: gamma_hat=" << rep.gamma_hat << " bound=" << rep.gamma_bound.value_or(0.0)
            << " violations=" << rep.violations << '\n';
  return 0;
}
