#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rfm/core/rng.hpp"
#include "rfm/geometry/manifold.hpp"
#include "rfm/mesh/mesh.hpp"

namespace rfm::nn {

/// One named slice of the flat parameter vector.  rows x cols == size; scalars
/// (the activation shapes) use rows = cols = 1.
struct ParameterSegment {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
};

/// Flat real vector over all weights, biases, and activation shapes, with a
/// named-segment index that partitions it exactly.  Optimizers and EMA operate
/// on the flat view; the network maps segments as matrices.
class ParameterSet {
 public:
  /// Declare a segment before finalize(); returns its index.
  int add(const std::string& name, int rows, int cols);
  void finalize();
  bool finalized() const { return finalized_; }

  int size() const { return static_cast<int>(flat_.size()); }
  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }

  Eigen::Map<Eigen::MatrixXd> matrix(int seg);
  Eigen::Map<const Eigen::MatrixXd> matrix(int seg) const;
  double& scalar(int seg);
  double scalar(int seg) const;

  const std::vector<ParameterSegment>& segments() const { return segments_; }
  int find(const std::string& name) const; /* -1 when absent */

 private:
  std::vector<ParameterSegment> segments_;
  Eigen::VectorXd flat_;
  bool finalized_ = false;
};

/// ema <- decay * ema + (1 - decay) * live (matching segment layouts required).
void ema_update(ParameterSet& ema, const ParameterSet& live, double decay);

struct MLPConfig {
  int ambient_dim = 0;             /* network output width; input adds 1 for time */
  std::vector<int> hidden = {64, 64, 64};

  bool operator==(const MLPConfig&) const = default;
};

/// Forward cache for one batch: everything backward() needs to replay the
/// network.  Column b of each matrix belongs to sample b.
struct Tape {
  Eigen::MatrixXd input;                /* (ambient+1) x B */
  std::vector<Eigen::MatrixXd> pre;     /* per hidden layer: z = W a + b */
  std::vector<Eigen::MatrixXd> post;    /* per hidden layer: swish(z) */
  Eigen::MatrixXd output;               /* ambient x B */
};

/// Time-conditioned MLP field v_theta(t, x): input [x; t], hidden layers with
/// a swish activation z * sigmoid(shape * z) whose scalar shape is learned per
/// layer, linear head.  Weights/biases start uniform scaled by 1/sqrt(fan_in);
/// the head is damped by 1e-2 so the initial field is near zero.
class MLPVectorField {
 public:
  MLPVectorField(MLPConfig cfg, std::uint64_t seed);

  const MLPConfig& config() const { return cfg_; }
  int num_hidden() const { return static_cast<int>(cfg_.hidden.size()); }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& ema() { return ema_; }
  const ParameterSet& ema() const { return ema_; }

  /// Raw network output (no projection); throws NumericError on non-finite
  /// inputs.
  Eigen::VectorXd forward_raw(double t, const Eigen::VectorXd& x,
                              const ParameterSet& p) const;
  Eigen::VectorXd forward_raw(double t, const Eigen::VectorXd& x) const {
    return forward_raw(t, x, params_);
  }

  /// Batched forward; column b of `inputs` is [x_b; t_b].  Fills `tape` when
  /// given so backward() can run.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, const ParameterSet& p,
                                Tape* tape = nullptr) const;

  /// Reverse-mode step: given dL/d(output) column-per-sample, accumulate
  /// dL/d(theta) into `grad` (size = params) and optionally dL/d(input).
  void backward(const Tape& tape, const ParameterSet& p, const Eigen::MatrixXd& dout,
                Eigen::VectorXd& grad, Eigen::MatrixXd* dinput = nullptr) const;

  /// d v_raw / d x at one point (spatial part only; time fixed).
  Eigen::MatrixXd raw_input_jacobian(double t, const Eigen::VectorXd& x,
                                     const ParameterSet& p) const;

  /// Segment indices, exposed for targeted tests.
  int weight_segment(int layer) const { return w_seg_[layer]; }
  int bias_segment(int layer) const { return b_seg_[layer]; }
  int shape_segment(int hidden_layer) const { return s_seg_[hidden_layer]; }

 private:
  MLPConfig cfg_;
  ParameterSet params_;
  ParameterSet ema_;
  std::vector<int> w_seg_, b_seg_, s_seg_;
};

/// The one differentiable loss shape the trainer composes: mean over columns of
/// || P_b * v_raw(input_b) - target_b ||^2.  Targets are constants (no gradient
/// flows into them) and projectors are sample-fixed symmetric matrices; an
/// empty projector list means identity.  Any other composition is
/// unrepresentable here by design, which is how the differentiation contract
/// is enforced at build time.
struct ProjectedResidualBatch {
  Eigen::MatrixXd inputs;                  /* (ambient+1) x B */
  Eigen::MatrixXd targets;                 /* ambient x B */
  std::vector<Eigen::MatrixXd> projectors; /* ambient x ambient each, or empty */
};

/// Returns the loss value and writes the parameter gradient (resized to the
/// parameter count) for the batch above.
double loss_and_gradient(const MLPVectorField& net, const ParameterSet& p,
                         const ProjectedResidualBatch& batch, Eigen::VectorXd& grad);

/// Manifold-aware field: v(x) = g(x)^{-1/2} P_{pi(x)} v_theta(t, pi(x)) with
/// pi the defensive projection onto the manifold.  Output is tangent at x;
/// the metric scaling keeps ||v||_g equal to the Euclidean norm of the
/// projected raw output.
TangentVector parameterized_field(const MLPVectorField& net, const ParameterSet& p,
                                  const ManifoldDescriptor& m, double t, const Point& x);

/// Ambient Jacobian of the full parameterized field (projection and metric
/// scaling differentiated as part of the composition), for divergence use.
Eigen::MatrixXd input_jacobian(const MLPVectorField& net, const ParameterSet& p,
                               const ManifoldDescriptor& m, double t, const Point& x);

/// Mesh variant: v = P_F v_theta(t, x) with P_F the tangent-plane projector of
/// the face under the located point (identity for planar z = 0 meshes).
Eigen::VectorXd mesh_field(const MLPVectorField& net, const ParameterSet& p,
                           const mesh::TriangleMesh& mesh, double t,
                           const mesh::MeshPoint& mp);
Eigen::MatrixXd mesh_input_jacobian(const MLPVectorField& net, const ParameterSet& p,
                                    const mesh::TriangleMesh& mesh, double t,
                                    const mesh::MeshPoint& mp);

/// Adam first/second moments plus the bias-correction step counter.
struct OptimState {
  Eigen::VectorXd m1, m2;
  std::int64_t steps = 0;
};

/// Versioned binary checkpoint: config echo, live + EMA parameters, optimizer
/// moments, iteration counter, and the run's base RNG seed.
struct Checkpoint {
  std::string manifold_tag;  /* e.g. "sphere:2" or "mesh:<hex hash>" */
  MLPConfig net_config;
  Eigen::VectorXd live, ema;
  OptimState optim;
  std::int64_t iteration = 0;
  std::uint64_t rng_seed = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rfm::nn
