#include "aio/airflow/lstm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace aio::airflow {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

struct StepCache {
  VectorXd x, i, f, g, o, c, h, tanh_c, c_prev, h_prev;
};

StepCache lstm_step(const LstmLayer& layer, const VectorXd& x,
                    const VectorXd& h_prev, const VectorXd& c_prev) {
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  const VectorXd z = layer.W * x + layer.U * h_prev + layer.b;
  s.i = sigmoid(z.segment(0, kHidden));
  s.f = sigmoid(z.segment(kHidden, kHidden));
  s.g = z.segment(2 * kHidden, kHidden).array().tanh().matrix();
  s.o = sigmoid(z.segment(3 * kHidden, kHidden));
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

struct LayerGrad {
  MatrixXd dW, dU;
  VectorXd db;
};

// Backward through one layer over the whole sequence. dh_ext[t] is the loss
// gradient flowing into h_t from above; returns the gradients flowing into
// the layer inputs x_t.
std::vector<VectorXd> lstm_backward(const LstmLayer& layer,
                                    const std::vector<StepCache>& steps,
                                    const std::vector<VectorXd>& dh_ext,
                                    LayerGrad& grad) {
  std::vector<VectorXd> dx(steps.size());
  VectorXd dh_rec = VectorXd::Zero(kHidden);
  VectorXd dc = VectorXd::Zero(kHidden);
  for (int t = static_cast<int>(steps.size()) - 1; t >= 0; --t) {
    const StepCache& s = steps[t];
    const VectorXd dh = dh_ext[t] + dh_rec;
    const VectorXd do_ = dh.cwiseProduct(s.tanh_c);
    dc += dh.cwiseProduct(s.o).cwiseProduct(
        (1.0 - s.tanh_c.array().square()).matrix());
    const VectorXd di = dc.cwiseProduct(s.g);
    const VectorXd dg = dc.cwiseProduct(s.i);
    const VectorXd df = dc.cwiseProduct(s.c_prev);
    const VectorXd dc_prev = dc.cwiseProduct(s.f);
    VectorXd dz(4 * kHidden);
    dz.segment(0, kHidden) = di.cwiseProduct(s.i).cwiseProduct((1.0 - s.i.array()).matrix());
    dz.segment(kHidden, kHidden) = df.cwiseProduct(s.f).cwiseProduct((1.0 - s.f.array()).matrix());
    dz.segment(2 * kHidden, kHidden) = dg.cwiseProduct((1.0 - s.g.array().square()).matrix());
    dz.segment(3 * kHidden, kHidden) = do_.cwiseProduct(s.o).cwiseProduct((1.0 - s.o.array()).matrix());
    grad.dW += dz * s.x.transpose();
    grad.dU += dz * s.h_prev.transpose();
    grad.db += dz;
    dx[t] = layer.W.transpose() * dz;
    dh_rec = layer.U.transpose() * dz;
    dc = dc_prev;
  }
  return dx;
}

VectorXd normalize(const LstmRegressor& m, const VectorXd& raw) {
  return m.feature_mask.cwiseProduct(
      (raw - m.norm_mean).cwiseQuotient(m.norm_std));
}

struct ForwardCache {
  std::vector<StepCache> l1, l2;
};

Vec3 forward_cached(const LstmRegressor& m, const Window& window, ForwardCache* cache) {
  VectorXd h1 = VectorXd::Zero(kHidden), c1 = VectorXd::Zero(kHidden);
  VectorXd h2 = VectorXd::Zero(kHidden), c2 = VectorXd::Zero(kHidden);
  for (int t = 0; t < kSeqLen; ++t) {
    const VectorXd x = normalize(m, window.row(t).transpose());
    StepCache s1 = lstm_step(m.layer1, x, h1, c1);
    h1 = s1.h;
    c1 = s1.c;
    StepCache s2 = lstm_step(m.layer2, s1.h, h2, c2);
    h2 = s2.h;
    c2 = s2.c;
    if (cache) {
      cache->l1.push_back(std::move(s1));
      cache->l2.push_back(std::move(s2));
    }
  }
  return m.head_W * h2 + m.head_b;
}

constexpr Eigen::Index layer_size(int in) { return 4 * kHidden * (in + kHidden + 1); }

Eigen::Index pack_layer(const LstmLayer& l, VectorXd& theta, Eigen::Index at) {
  for (Eigen::Index r = 0; r < l.W.rows(); ++r)
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) theta[at++] = l.W(r, c);
  for (Eigen::Index r = 0; r < l.U.rows(); ++r)
    for (Eigen::Index c = 0; c < l.U.cols(); ++c) theta[at++] = l.U(r, c);
  for (Eigen::Index r = 0; r < l.b.size(); ++r) theta[at++] = l.b[r];
  return at;
}

Eigen::Index unpack_layer(LstmLayer& l, const VectorXd& theta, Eigen::Index at) {
  for (Eigen::Index r = 0; r < l.W.rows(); ++r)
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = theta[at++];
  for (Eigen::Index r = 0; r < l.U.rows(); ++r)
    for (Eigen::Index c = 0; c < l.U.cols(); ++c) l.U(r, c) = theta[at++];
  for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b[r] = theta[at++];
  return at;
}

}  // namespace

Vec3 LstmRegressor::forward(const Window& window) const {
  return forward_cached(*this, window, nullptr);
}

Eigen::Index LstmRegressor::num_params() const {
  return layer_size(kInputDim) + layer_size(kHidden) +
         kOutputDim * kHidden + kOutputDim;
}

Eigen::VectorXd LstmRegressor::params_flat() const {
  VectorXd theta(num_params());
  Eigen::Index at = 0;
  at = pack_layer(layer1, theta, at);
  at = pack_layer(layer2, theta, at);
  for (Eigen::Index r = 0; r < kOutputDim; ++r)
    for (Eigen::Index c = 0; c < kHidden; ++c) theta[at++] = head_W(r, c);
  for (Eigen::Index r = 0; r < kOutputDim; ++r) theta[at++] = head_b[r];
  return theta;
}

void LstmRegressor::set_params_flat(const Eigen::VectorXd& theta) {
  if (theta.size() != num_params())
    throw std::invalid_argument("flat parameter size mismatch");
  Eigen::Index at = 0;
  at = unpack_layer(layer1, theta, at);
  at = unpack_layer(layer2, theta, at);
  for (Eigen::Index r = 0; r < kOutputDim; ++r)
    for (Eigen::Index c = 0; c < kHidden; ++c) head_W(r, c) = theta[at++];
  for (Eigen::Index r = 0; r < kOutputDim; ++r) head_b[r] = theta[at++];
}

LstmRegressor make_empty_regressor() {
  LstmRegressor m;
  m.layer1 = {MatrixXd::Zero(4 * kHidden, kInputDim),
              MatrixXd::Zero(4 * kHidden, kHidden), VectorXd::Zero(4 * kHidden)};
  m.layer2 = {MatrixXd::Zero(4 * kHidden, kHidden),
              MatrixXd::Zero(4 * kHidden, kHidden), VectorXd::Zero(4 * kHidden)};
  m.head_W = MatrixXd::Zero(kOutputDim, kHidden);
  m.head_b = VectorXd::Zero(kOutputDim);
  m.norm_mean = VectorXd::Zero(kInputDim);
  m.norm_std = VectorXd::Ones(kInputDim);
  m.feature_mask = VectorXd::Ones(kInputDim);
  return m;
}

double loss_and_gradient(const LstmRegressor& model,
                         const std::vector<Window>& windows,
                         const std::vector<Vec3>& targets,
                         Eigen::VectorXd& grad) {
  if (windows.size() != targets.size() || windows.empty())
    throw std::invalid_argument("windows/targets mismatch");

  LayerGrad g1{MatrixXd::Zero(4 * kHidden, kInputDim),
               MatrixXd::Zero(4 * kHidden, kHidden), VectorXd::Zero(4 * kHidden)};
  LayerGrad g2{MatrixXd::Zero(4 * kHidden, kHidden),
               MatrixXd::Zero(4 * kHidden, kHidden), VectorXd::Zero(4 * kHidden)};
  MatrixXd d_head_W = MatrixXd::Zero(kOutputDim, kHidden);
  VectorXd d_head_b = VectorXd::Zero(kOutputDim);

  double loss = 0.0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    ForwardCache cache;
    const Vec3 y = forward_cached(model, windows[w], &cache);
    const Vec3 r = y - targets[w];
    loss += 0.5 * r.squaredNorm();

    d_head_W += r * cache.l2.back().h.transpose();
    d_head_b += r;
    std::vector<VectorXd> dh2(kSeqLen, VectorXd::Zero(kHidden));
    dh2.back() = model.head_W.transpose() * r;
    const std::vector<VectorXd> dh1 = lstm_backward(model.layer2, cache.l2, dh2, g2);
    lstm_backward(model.layer1, cache.l1, dh1, g1);
  }

  LstmRegressor shaped = model;  // reuse the flat layout for the gradient
  shaped.layer1 = {g1.dW, g1.dU, g1.db};
  shaped.layer2 = {g2.dW, g2.dU, g2.db};
  shaped.head_W = d_head_W;
  shaped.head_b = d_head_b;
  grad = shaped.params_flat();
  return loss;
}

namespace {

nlohmann::json mat_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd mat_from(const nlohmann::json& j) {
  MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& d = j.at("data");
  if (static_cast<Eigen::Index>(d.size()) != m.size())
    throw std::runtime_error("weight payload size mismatch");
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = d[i++];
  return m;
}

nlohmann::json layer_json(const LstmLayer& l) {
  return {{"W", mat_json(l.W)}, {"U", mat_json(l.U)}, {"b", mat_json(l.b)}};
}

LstmLayer layer_from(const nlohmann::json& j) {
  return {mat_from(j.at("W")), mat_from(j.at("U")), VectorXd(mat_from(j.at("b")))};
}

}  // namespace

std::string LstmRegressor::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["input_dim"] = kInputDim;
  j["hidden"] = kHidden;
  j["seq_len"] = kSeqLen;
  j["layer1"] = layer_json(layer1);
  j["layer2"] = layer_json(layer2);
  j["head_W"] = mat_json(head_W);
  j["head_b"] = mat_json(head_b);
  j["norm_mean"] = mat_json(norm_mean);
  j["norm_std"] = mat_json(norm_std);
  j["feature_mask"] = mat_json(feature_mask);
  j["sigma_lstm"] = mat_json(sigma_lstm);
  return j.dump(2);
}

LstmRegressor LstmRegressor::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format_version") != 1)
    throw std::runtime_error("unsupported regressor format version");
  if (j.at("input_dim") != kInputDim || j.at("hidden") != kHidden ||
      j.at("seq_len") != kSeqLen)
    throw std::runtime_error("regressor dimensions do not match this build");
  LstmRegressor m = make_empty_regressor();
  m.layer1 = layer_from(j.at("layer1"));
  m.layer2 = layer_from(j.at("layer2"));
  m.head_W = mat_from(j.at("head_W"));
  m.head_b = VectorXd(mat_from(j.at("head_b")));
  m.norm_mean = VectorXd(mat_from(j.at("norm_mean")));
  m.norm_std = VectorXd(mat_from(j.at("norm_std")));
  m.feature_mask = VectorXd(mat_from(j.at("feature_mask")));
  m.sigma_lstm = Mat3(mat_from(j.at("sigma_lstm")));
  if ((m.norm_std.array() <= 0.0).any())
    throw std::runtime_error("normalization stds must be positive");
  return m;
}

void LstmRegressor::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << to_json() << '\n';
}

LstmRegressor LstmRegressor::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace aio::airflow
