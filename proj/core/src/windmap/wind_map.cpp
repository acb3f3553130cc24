#include "aio/windmap/wind_map.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "aio/rng.hpp"

namespace aio::windmap {

namespace {

constexpr double kJitterRel = 1e-8;

// Pairwise squared distances, rows of A vs rows of B.
Eigen::MatrixXd sq_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd D(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    D.row(i) = (B.rowwise() - A.row(i)).rowwise().squaredNorm().transpose();
  return D;
}

Eigen::MatrixXd gram(const KernelParams& k, const Eigen::MatrixXd& D2) {
  return k.signal_var * (-D2 / (2.0 * k.length_scale * k.length_scale))
             .array().exp().matrix();
}

Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd K, double base_jitter,
                                             bool* jitter_grew) {
  double jitter = base_jitter;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
    if (llt.info() == Eigen::Success) {
      if (attempt > 0 && jitter_grew) *jitter_grew = true;
      return llt;
    }
    jitter *= 10.0;
  }
  throw std::runtime_error("Gram matrix not positive definite even with jitter");
}

// k-means++ seeding followed by Lloyd iterations; deterministic given seed.
Eigen::MatrixXd kmeans(const Eigen::MatrixXd& X, int M, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  if (M >= n) return X;
  auto rng = make_rng(seed, "kmeans-inducing");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd C(M, 3);
  C.row(0) = X.row(static_cast<Eigen::Index>(unif(rng) * n) % n);
  Eigen::VectorXd d2 = (X.rowwise() - C.row(0)).rowwise().squaredNorm();
  for (int m = 1; m < M; ++m) {
    double r = unif(rng) * d2.sum();
    Eigen::Index pick = 0;
    for (; pick < n - 1 && r > d2[pick]; ++pick) r -= d2[pick];
    C.row(m) = X.row(pick);
    d2 = d2.cwiseMin((X.rowwise() - C.row(m)).rowwise().squaredNorm());
  }
  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 25; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = (X.row(i) - C.row(0)).squaredNorm();
      for (int m = 1; m < M; ++m) {
        const double d = (X.row(i) - C.row(m)).squaredNorm();
        if (d < bd) { bd = d; best = m; }
      }
      if (assign[i] != best) { assign[i] = best; changed = true; }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(M, 3);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(M);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += X.row(i);
      counts[assign[i]] += 1.0;
    }
    for (int m = 0; m < M; ++m)
      if (counts[m] > 0.0) C.row(m) = sums.row(m) / counts[m];
  }
  return C;
}

// Monotone backtracking gradient ascent. eval must return the objective and
// fill the gradient. History records every accepted objective value.
template <typename Eval>
void ascend(Eigen::VectorXd& theta, const Eval& eval, const GpFitConfig& cfg,
            std::vector<double>* history) {
  Eigen::VectorXd grad(theta.size());
  double value = eval(theta, grad);
  if (!std::isfinite(value))
    throw std::runtime_error("non-finite GP objective at initial point");
  history->push_back(value);
  double step = cfg.init_step;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double gnorm = grad.norm();
    if (gnorm < 1e-12) break;
    bool accepted = false;
    Eigen::VectorXd trial_grad(theta.size());
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd trial = theta + (step / gnorm) * grad;
      const double trial_value = eval(trial, trial_grad);
      if (std::isfinite(trial_value) && trial_value > value) {
        theta = trial;
        value = trial_value;
        grad = trial_grad;
        history->push_back(value);
        accepted = true;
        step *= 1.5;
        break;
      }
      step *= 0.5;
      if (step < 1e-13) break;
    }
    if (!accepted) break;
    if (history->size() >= 2) {
      const double prev = (*history)[history->size() - 2];
      if (std::abs(value - prev) < cfg.rel_tol * (std::abs(value) + 1.0)) break;
    }
  }
}

struct AxisPosterior {
  Eigen::VectorXd q_mean, alpha;
  Eigen::MatrixXd q_cov, beta;
};

// Titsias posterior from the optimized inducing set, in query-factor form.
AxisPosterior sparse_posterior(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& Z, const KernelParams& k) {
  const double sn = std::sqrt(k.noise_var);
  Eigen::MatrixXd Kmm = gram(k, sq_dist(Z, Z));
  Kmm.diagonal().array() += kJitterRel * k.signal_var;
  const Eigen::LLT<Eigen::MatrixXd> L = chol_with_jitter(Kmm, 0.0, nullptr);
  const Eigen::MatrixXd Kmn = gram(k, sq_dist(Z, X));
  const Eigen::MatrixXd A = L.matrixL().solve(Kmn) / sn;
  Eigen::MatrixXd B = A * A.transpose();
  B.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> LB(B);
  const Eigen::VectorXd Ay = A * y;

  AxisPosterior out;
  // alpha = L^-T B^-1 (A y) / sn ; beta = Kmm^-1 - L^-T B^-1 L^-1
  out.alpha = L.matrixL().transpose().solve(LB.solve(Ay)) / sn;
  const Eigen::MatrixXd Linv = L.matrixL().solve(Eigen::MatrixXd::Identity(Z.rows(), Z.rows()));
  out.beta = L.solve(Eigen::MatrixXd::Identity(Z.rows(), Z.rows())) -
             Linv.transpose() * LB.solve(Linv);
  out.q_mean = Kmm * out.alpha;
  out.q_cov = Kmm - Kmm * out.beta * Kmm;
  return out;
}

}  // namespace

void KernelParams::validate() const {
  if (!(signal_var > 0.0) || !(length_scale > 0.0) || !(noise_var > 0.0))
    throw std::invalid_argument("kernel parameters must be strictly positive");
}

double rbf_kernel(const KernelParams& k, const Vec3& p, const Vec3& q) {
  return k.signal_var *
         std::exp(-(p - q).squaredNorm() / (2.0 * k.length_scale * k.length_scale));
}

void WindDataset::validate() const {
  if (positions.rows() < 1 || positions.rows() != wind.rows() ||
      positions.cols() != 3 || wind.cols() != 3)
    throw std::invalid_argument("wind dataset must hold K >= 1 position/wind pairs");
  if (!positions.allFinite() || !wind.allFinite())
    throw std::invalid_argument("wind dataset contains non-finite values");
}

ElboGradient sparse_elbo(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::MatrixXd& Z, const KernelParams& k) {
  const Eigen::Index n = X.rows(), M = Z.rows();
  const double sf2 = k.signal_var, l2 = k.length_scale * k.length_scale;
  const double sn2 = k.noise_var;

  const Eigen::MatrixXd D2mm = sq_dist(Z, Z);
  const Eigen::MatrixXd D2mn = sq_dist(Z, X);
  Eigen::MatrixXd Kmm = gram(k, D2mm);
  Kmm.diagonal().array() += kJitterRel * sf2;
  const Eigen::MatrixXd Kmn = gram(k, D2mn);

  const Eigen::LLT<Eigen::MatrixXd> L = chol_with_jitter(Kmm, 0.0, nullptr);
  const double sn = std::sqrt(sn2);
  const Eigen::MatrixXd A = L.matrixL().solve(Kmn) / sn;  // M x n
  Eigen::MatrixXd B = A * A.transpose();
  const double trAAt = B.trace();
  B.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> LB(B);

  const Eigen::VectorXd Ay = A * y;
  const Eigen::VectorXd c = LB.matrixL().solve(Ay) / sn;
  const double logdetB =
      2.0 * Eigen::MatrixXd(LB.matrixL()).diagonal().array().log().sum();
  const double trKnn = static_cast<double>(n) * sf2;
  const double trQ = sn2 * trAAt;

  ElboGradient out;
  out.value = -0.5 * n * std::log(2.0 * M_PI) -
              0.5 * (n * std::log(sn2) + logdetB) -
              0.5 * (y.squaredNorm() / sn2 - c.squaredNorm()) -
              (trKnn - trQ) / (2.0 * sn2);

  // Adjoints of the Gram blocks (see the Titsias bound written with
  // Q = Knm Kmm^-1 Kmn and Sigma = Q + sn2 I).
  const Eigen::VectorXd alpha = (y - A.transpose() * LB.solve(Ay)) / sn2;  // Sigma^-1 y
  const Eigen::MatrixXd P = L.matrixL().transpose().solve(A) * sn;        // Kmm^-1 Kmn
  const Eigen::MatrixXd PSigInv =
      (P - (P * A.transpose()) * LB.solve(A)) / sn2;                      // M x n
  const Eigen::VectorXd Pa = P * alpha;
  const Eigen::MatrixXd PG = PSigInv - Pa * alpha.transpose();            // P (Sig^-1 - aa^T)
  const Eigen::MatrixXd barKmn = -PG + P / sn2;
  const Eigen::MatrixXd barKmm =
      0.5 * (PG * P.transpose()) - (P * P.transpose()) / (2.0 * sn2);

  // d/d log sf2: every kernel block scales linearly with sf2.
  out.d_log_params[0] = barKmn.cwiseProduct(Kmn).sum() +
                        barKmm.cwiseProduct(Kmm).sum() -
                        trKnn / (2.0 * sn2);
  // d/d log l: dk = k * d^2 / l^2.
  out.d_log_params[1] =
      (barKmn.cwiseProduct(Kmn).cwiseProduct(D2mn).sum() +
       barKmm.cwiseProduct(Kmm).cwiseProduct(D2mm).sum()) / l2;
  // d/d log sn2.
  const double trSigInv = (static_cast<double>(n) - (M - LB.solve(Eigen::MatrixXd::Identity(M, M)).trace())) / sn2;
  out.d_log_params[2] = sn2 * (-0.5 * trSigInv + 0.5 * alpha.squaredNorm() +
                               (trKnn - trQ) / (2.0 * sn2 * sn2));

  // d/dZ via the same adjoints; diagonal Kmm entries have zero derivative.
  out.d_Z = Eigen::MatrixXd::Zero(M, 3);
  for (Eigen::Index m = 0; m < M; ++m) {
    Vec3 g = Vec3::Zero();
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec3 diff = (Z.row(m) - X.row(j)).transpose();
      g += barKmn(m, j) * Kmn(m, j) * (-diff / l2);
    }
    for (Eigen::Index j = 0; j < M; ++j) {
      if (j == m) continue;
      const Vec3 diff = (Z.row(m) - Z.row(j)).transpose();
      g += 2.0 * barKmm(m, j) * Kmm(m, j) * (-diff / l2);
    }
    out.d_Z.row(m) = g.transpose();
  }
  return out;
}

MarginalGradient exact_log_marginal(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y,
                                    const KernelParams& k) {
  const Eigen::Index n = X.rows();
  const Eigen::MatrixXd D2 = sq_dist(X, X);
  Eigen::MatrixXd K = gram(k, D2);
  K.diagonal().array() += kJitterRel * k.signal_var;
  Eigen::MatrixXd Ky = K;
  Ky.diagonal().array() += k.noise_var;
  const Eigen::LLT<Eigen::MatrixXd> L = chol_with_jitter(Ky, 0.0, nullptr);
  const Eigen::VectorXd alpha = L.solve(y);
  const double logdet =
      2.0 * Eigen::MatrixXd(L.matrixL()).diagonal().array().log().sum();

  MarginalGradient out;
  out.value = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * n * std::log(2.0 * M_PI);

  // dL/dtheta = 0.5 tr((alpha alpha^T - Ky^-1) dK/dtheta)
  const Eigen::MatrixXd W =
      alpha * alpha.transpose() - L.solve(Eigen::MatrixXd::Identity(n, n));
  out.d_log_params[0] = 0.5 * W.cwiseProduct(K).sum();
  out.d_log_params[1] =
      0.5 * W.cwiseProduct(K.cwiseProduct(D2)).sum() / (k.length_scale * k.length_scale);
  out.d_log_params[2] = 0.5 * W.trace() * k.noise_var;
  return out;
}

QueryResult WindMap::query(const Vec3& p) const {
  QueryResult out;
  for (int axis = 0; axis < 3; ++axis) {
    const AxisGp& g = axes_[axis];
    const Eigen::Index M = g.Z.rows();
    Eigen::VectorXd ks(M);
    for (Eigen::Index m = 0; m < M; ++m)
      ks[m] = rbf_kernel(g.kernel, p, g.Z.row(m).transpose());
    out.mean[axis] = ks.dot(g.alpha);
    out.var[axis] = std::max(g.kernel.signal_var - ks.dot(g.beta * ks), 0.0);
  }
  return out;
}

Mat3 WindMap::mean_jacobian(const Vec3& p) const {
  Mat3 J = Mat3::Zero();
  for (int axis = 0; axis < 3; ++axis) {
    const AxisGp& g = axes_[axis];
    const double l2 = g.kernel.length_scale * g.kernel.length_scale;
    Vec3 grad = Vec3::Zero();
    for (Eigen::Index m = 0; m < g.Z.rows(); ++m) {
      const Vec3 zm = g.Z.row(m).transpose();
      grad += g.alpha[m] * rbf_kernel(g.kernel, p, zm) * (-(p - zm) / l2);
    }
    J.row(axis) = grad.transpose();
  }
  return J;
}

WindMap fit_exact(const WindDataset& data, const KernelParams& init,
                  const GpFitConfig& config) {
  data.validate();
  init.validate();
  const Eigen::Index n = data.size();
  if (n > 5000)
    throw std::invalid_argument("exact GP limited to K <= 5000; use fit_sparse");

  WindMap map;
  map.mode_ = WindMap::Mode::Exact;
  for (int axis = 0; axis < 3; ++axis) {
    AxisGp& g = map.axes_[axis];
    g.kernel = init;
    const Eigen::VectorXd y = data.wind.col(axis);

    if (config.optimize_hypers) {
      Eigen::VectorXd theta(3);
      theta << std::log(init.signal_var), std::log(init.length_scale),
               std::log(init.noise_var);
      const double log_floor = config.min_noise_var > 0.0
                                   ? std::log(config.min_noise_var)
                                   : -std::numeric_limits<double>::infinity();
      auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
        KernelParams k{std::exp(th[0]), std::exp(th[1]),
                       std::exp(std::max(th[2], log_floor))};
        const MarginalGradient mg = exact_log_marginal(data.positions, y, k);
        grad = mg.d_log_params;
        if (th[2] <= log_floor && grad[2] < 0.0) grad[2] = 0.0;
        return mg.value;
      };
      ascend(theta, eval, config, &g.objective_history);
      theta[2] = std::max(theta[2], log_floor);
      g.kernel = KernelParams{std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2])};
    } else {
      g.objective_history.push_back(
          exact_log_marginal(data.positions, y, init).value);
    }

    Eigen::MatrixXd K = gram(g.kernel, sq_dist(data.positions, data.positions));
    K.diagonal().array() += kJitterRel * g.kernel.signal_var;
    Eigen::MatrixXd Ky = K;
    Ky.diagonal().array() += g.kernel.noise_var;
    bool grew = false;
    const Eigen::LLT<Eigen::MatrixXd> L = chol_with_jitter(Ky, 0.0, &grew);
    if (grew) map.jitter_added_ = true;
    g.Z = data.positions;
    g.alpha = L.solve(y);
    g.beta = L.solve(Eigen::MatrixXd::Identity(n, n));
    g.q_mean = K * g.alpha;
    g.q_cov = K - K * g.beta * K;
  }
  return map;
}

WindMap fit_sparse(const WindDataset& data, const KernelParams& init, int M,
                   const GpFitConfig& config) {
  data.validate();
  init.validate();
  const Eigen::Index n = data.size();
  if (M < 1 || M > n)
    throw std::invalid_argument("need 1 <= M <= K inducing points");

  const Eigen::MatrixXd Z0 = kmeans(data.positions, M, config.seed);

  WindMap map;
  map.mode_ = WindMap::Mode::Sparse;
  for (int axis = 0; axis < 3; ++axis) {
    AxisGp& g = map.axes_[axis];
    const Eigen::VectorXd y = data.wind.col(axis);

    Eigen::VectorXd theta(3 + 3 * M);
    theta[0] = std::log(init.signal_var);
    theta[1] = std::log(init.length_scale);
    theta[2] = std::log(init.noise_var);
    for (int m = 0; m < M; ++m) theta.segment<3>(3 + 3 * m) = Z0.row(m).transpose();

    auto unpack = [M](const Eigen::VectorXd& th, KernelParams& k, Eigen::MatrixXd& Z) {
      k = KernelParams{std::exp(th[0]), std::exp(th[1]), std::exp(th[2])};
      Z.resize(M, 3);
      for (int m = 0; m < M; ++m) Z.row(m) = th.segment<3>(3 + 3 * m).transpose();
    };

    if (config.optimize_hypers && config.max_iters > 0) {
      const double log_floor = config.min_noise_var > 0.0
                                   ? std::log(config.min_noise_var)
                                   : -std::numeric_limits<double>::infinity();
      auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
        Eigen::VectorXd thc = th;
        thc[2] = std::max(thc[2], log_floor);
        KernelParams k;
        Eigen::MatrixXd Z;
        unpack(thc, k, Z);
        const ElboGradient e = sparse_elbo(data.positions, y, Z, k);
        grad.resize(th.size());
        grad.segment<3>(0) = e.d_log_params;
        if (th[2] <= log_floor && grad[2] < 0.0) grad[2] = 0.0;
        for (int m = 0; m < M; ++m) grad.segment<3>(3 + 3 * m) = e.d_Z.row(m).transpose();
        return e.value;
      };
      ascend(theta, eval, config, &g.objective_history);
      theta[2] = std::max(theta[2], log_floor);
    } else {
      g.objective_history.push_back(sparse_elbo(data.positions, y, Z0, init).value);
    }

    KernelParams k;
    Eigen::MatrixXd Z;
    unpack(theta, k, Z);
    g.kernel = k;
    g.Z = Z;
    const AxisPosterior post = sparse_posterior(data.positions, y, Z, k);
    g.q_mean = post.q_mean;
    g.q_cov = post.q_cov;
    g.alpha = post.alpha;
    g.beta = post.beta;
  }
  return map;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = data;  // row-major
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows"), cols = j.at("cols");
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  return m;
}

}  // namespace

std::string WindMap::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["mode"] = mode_ == Mode::Exact ? "exact" : "sparse";
  j["jitter_added"] = jitter_added_;
  for (int axis = 0; axis < 3; ++axis) {
    const AxisGp& g = axes_[axis];
    nlohmann::json ja;
    ja["signal_var"] = g.kernel.signal_var;
    ja["length_scale"] = g.kernel.length_scale;
    ja["noise_var"] = g.kernel.noise_var;
    ja["inducing_inputs"] = matrix_to_json(g.Z);
    ja["q_mean"] = matrix_to_json(g.q_mean);
    ja["q_cov"] = matrix_to_json(g.q_cov);
    ja["alpha"] = matrix_to_json(g.alpha);
    ja["beta"] = matrix_to_json(g.beta);
    j["axes"].push_back(ja);
  }
  return j.dump(2);
}

WindMap WindMap::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format_version") != 1)
    throw std::runtime_error("unsupported wind map format version");
  WindMap map;
  map.mode_ = j.at("mode") == "exact" ? Mode::Exact : Mode::Sparse;
  map.jitter_added_ = j.value("jitter_added", false);
  for (int axis = 0; axis < 3; ++axis) {
    const auto& ja = j.at("axes").at(axis);
    AxisGp& g = map.axes_[axis];
    g.kernel = KernelParams{ja.at("signal_var"), ja.at("length_scale"),
                            ja.at("noise_var")};
    g.kernel.validate();
    g.Z = matrix_from_json(ja.at("inducing_inputs"));
    g.q_mean = matrix_from_json(ja.at("q_mean"));
    g.q_cov = matrix_from_json(ja.at("q_cov"));
    g.alpha = matrix_from_json(ja.at("alpha"));
    g.beta = matrix_from_json(ja.at("beta"));
  }
  return map;
}

void WindMap::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << to_json() << '\n';
}

WindMap WindMap::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace aio::windmap
