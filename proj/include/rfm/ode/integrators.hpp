#pragma once

#include <Eigen/Core>
#include <functional>

namespace rfm::ode {

using Field = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& y)>;
/// Optional post-step hook (e.g. manifold projection); may modify y in place.
using PostStep = std::function<void(double t, Eigen::VectorXd& y)>;

struct DopriOptions {
  double rtol = 1e-7;
  double atol = 1e-7;
  double initial_step = 1e-3; /* magnitude; direction follows t1 - t0 */
  double min_step = 1e-12;
  double max_step = 0.2;
  int max_steps = 200000;
};

struct DopriResult {
  Eigen::VectorXd y;
  int accepted = 0;
  int rejected = 0;
  int evaluations = 0;
};

/// Dormand-Prince 5(4) with the standard PI step controller; integrates from
/// t0 to t1 in either direction, landing exactly on t1.  Throws SolverError
/// when the step controller stalls (step below min_step or max_steps hit).
DopriResult integrate_dopri5(const Field& f, double t0, double t1, const Eigen::VectorXd& y0,
                             const DopriOptions& opts = {});

/// Fixed-step explicit Euler with `steps` uniform steps from t0 to t1 (either
/// direction).  `post`, when given, runs after every step.
Eigen::VectorXd integrate_euler(const Field& f, double t0, double t1, const Eigen::VectorXd& y0,
                                int steps, const PostStep& post = nullptr);

}  // namespace rfm::ode
