// Probabilistic stationary wind map: three independent GPs (one per world
// axis) with an isotropic RBF kernel. Supports exact regression for small
// datasets and a variational sparse approximation with M inducing points
// whose ELBO is maximized over inducing locations and kernel hyperparameters.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aio/so3.hpp"

namespace aio::windmap {

struct KernelParams {
  double signal_var = 1.0;   // sigma_f^2, (m/s)^2
  double length_scale = 1.0; // l, m
  double noise_var = 0.01;   // sigma_n^2, (m/s)^2

  void validate() const;
};

/// sigma_f^2 * exp(-|p - q|^2 / (2 l^2))
double rbf_kernel(const KernelParams& k, const Vec3& p, const Vec3& q);

struct WindDataset {
  Eigen::MatrixXd positions;  // K x 3
  Eigen::MatrixXd wind;       // K x 3, world frame
  double subsample_hz = 1.0;

  Eigen::Index size() const { return positions.rows(); }
  void validate() const;
};

struct GpFitConfig {
  bool optimize_hypers = true;
  int max_iters = 200;
  double init_step = 0.1;       // backtracking line-search initial step
  double rel_tol = 1e-7;
  // Lower bound on the optimized noise variance. Correlated residuals in the
  // training wind estimates otherwise collapse sigma_n^2 and the posterior
  // interpolates them instead of averaging repeated passes.
  double min_noise_var = 0.0;
  std::uint64_t seed = 0;       // inducing-point k-means init
};

struct QueryResult {
  Vec3 mean = Vec3::Zero();
  Vec3 var = Vec3::Zero();  // per-axis; Sigma_M(p) = var.asDiagonal()
};

struct AxisGp {
  KernelParams kernel;
  Eigen::MatrixXd Z;          // M x 3 inducing (or training) inputs
  Eigen::VectorXd q_mean;     // posterior over inducing outputs
  Eigen::MatrixXd q_cov;
  Eigen::VectorXd alpha;      // query factors: mean = k_*^T alpha
  Eigen::MatrixXd beta;       // var = k(p,p) - k_*^T beta k_*
  std::vector<double> objective_history;  // ELBO or log-marginal per iter
};

class WindMap {
 public:
  enum class Mode { Exact, Sparse };

  Mode mode() const { return mode_; }
  const std::array<AxisGp, 3>& axes() const { return axes_; }
  bool jitter_added() const { return jitter_added_; }

  QueryResult query(const Vec3& p) const;

  /// Analytic Jacobian of the posterior mean with respect to position.
  Mat3 mean_jacobian(const Vec3& p) const;

  std::string to_json() const;
  static WindMap from_json(const std::string& text);
  void save(const std::string& path) const;
  static WindMap load(const std::string& path);

  friend WindMap fit_exact(const WindDataset&, const KernelParams&,
                           const GpFitConfig&);
  friend WindMap fit_sparse(const WindDataset&, const KernelParams&, int,
                            const GpFitConfig&);

 private:
  Mode mode_ = Mode::Exact;
  std::array<AxisGp, 3> axes_;
  bool jitter_added_ = false;
};

/// Dense GP regression; rejects K > 5000. Conditioning trouble is handled by
/// adding jitter, reported through WindMap::jitter_added().
WindMap fit_exact(const WindDataset& data, const KernelParams& init,
                  const GpFitConfig& config = {});

/// Variational sparse GP with M inducing points, initialized by k-means over
/// the training positions. The ELBO is ascended with a monotone backtracking
/// line search over inducing locations and log-kernel hyperparameters.
WindMap fit_sparse(const WindDataset& data, const KernelParams& init, int M,
                   const GpFitConfig& config = {});

// Exposed for gradient verification in tests.
struct ElboGradient {
  double value = 0.0;
  Vec3 d_log_params = Vec3::Zero();  // d/d(log sf2, log l, log sn2)
  Eigen::MatrixXd d_Z;               // M x 3
};
ElboGradient sparse_elbo(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::MatrixXd& Z, const KernelParams& k);

struct MarginalGradient {
  double value = 0.0;
  Vec3 d_log_params = Vec3::Zero();
};
MarginalGradient exact_log_marginal(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y,
                                    const KernelParams& k);

}  // namespace aio::windmap
