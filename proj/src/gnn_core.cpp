#include "seegnn/gnn_core.hpp"

#include "seegnn/error.hpp"
#include "seegnn/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace seegnn {

using nlohmann::json;

ParamSet ParamSet::zeros_like(const ParamSet& other) {
  ParamSet out;
  out.w1 = Eigen::MatrixXd::Zero(other.w1.rows(), other.w1.cols());
  out.b1 = Eigen::RowVectorXd::Zero(other.b1.size());
  out.w2 = Eigen::MatrixXd::Zero(other.w2.rows(), other.w2.cols());
  out.b2 = Eigen::RowVectorXd::Zero(other.b2.size());
  out.w_out = Eigen::MatrixXd::Zero(other.w_out.rows(), other.w_out.cols());
  out.b_out = Eigen::RowVectorXd::Zero(other.b_out.size());
  return out;
}

bool ParamSet::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w_out.allFinite() && b_out.allFinite();
}

bool ParamSet::all_zero() const {
  return w1.isZero(0.0) && b1.isZero(0.0) && w2.isZero(0.0) && b2.isZero(0.0) &&
         w_out.isZero(0.0) && b_out.isZero(0.0);
}

bool ParamSet::same_shape(const ParamSet& o) const {
  auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  return same(w1, o.w1) && same(b1, o.b1) && same(w2, o.w2) && same(b2, o.b2) &&
         same(w_out, o.w_out) && same(b_out, o.b_out);
}

std::size_t ParamSet::size() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w_out.size() +
                                  b_out.size());
}

void ParamSet::for_each(const std::function<void(const char*, Eigen::Ref<Eigen::MatrixXd>)>& fn) {
  // Row vectors are viewed as 1 x k matrices.
  Eigen::Map<Eigen::MatrixXd> b1_view(b1.data(), 1, b1.size());
  Eigen::Map<Eigen::MatrixXd> b2_view(b2.data(), 1, b2.size());
  Eigen::Map<Eigen::MatrixXd> b_out_view(b_out.data(), 1, b_out.size());
  fn("w1", w1);
  fn("b1", b1_view);
  fn("w2", w2);
  fn("b2", b2_view);
  fn("w_out", w_out);
  fn("b_out", b_out_view);
}

void ParamSet::for_each(const std::function<void(const char*, const Eigen::MatrixXd&)>& fn) const {
  fn("w1", w1);
  fn("b1", Eigen::MatrixXd(b1));
  fn("w2", w2);
  fn("b2", Eigen::MatrixXd(b2));
  fn("w_out", w_out);
  fn("b_out", Eigen::MatrixXd(b_out));
}

AdamState make_adam_state(const GcnModel& model, double lr) {
  AdamState state;
  state.m = ParamSet::zeros_like(model.params);
  state.v = ParamSet::zeros_like(model.params);
  state.lr = lr;
  return state;
}

Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& weights) {
  const Eigen::Index n = weights.rows();
  if (weights.cols() != n) throw Error(ErrorKind::NonSymmetric, "adjacency is not square");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (weights(i, j) < 0.0) {
        throw Error(ErrorKind::NegativeWeight, "adjacency entry (" + std::to_string(i) + "," +
                                                   std::to_string(j) + ") is negative");
      }
      if (weights(i, j) != weights(j, i)) {
        throw Error(ErrorKind::NonSymmetric, "adjacency entry (" + std::to_string(i) + "," +
                                                 std::to_string(j) + ") differs from its transpose");
      }
    }
  }
  Eigen::MatrixXd a = weights;
  a.diagonal().setOnes();
  const Eigen::VectorXd inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
  Eigen::MatrixXd out = inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
  // Exact symmetry regardless of evaluation order.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out(j, i) = out(i, j);
  }
  return out;
}

ForwardResult forward(const GcnModel& model, const Eigen::MatrixXd& a_hat, const FeatureMatrix& x,
                      DropoutOptions dropout) {
  const Eigen::Index n = x.rows();
  if (a_hat.rows() != n || a_hat.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "adjacency is " + std::to_string(a_hat.rows()) + "x" +
                                              std::to_string(a_hat.cols()) + " for " +
                                              std::to_string(n) + " nodes");
  }
  if (n < 1) throw Error(ErrorKind::ShapeMismatch, "graph has no nodes");
  if (x.cols() != model.params.w1.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "feature length " + std::to_string(x.cols()) +
                                              " but model expects " +
                                              std::to_string(model.params.w1.rows()));
  }
  if (!x.allFinite() || !a_hat.allFinite()) {
    throw Error(ErrorKind::NonFiniteInput, "forward input contains NaN or Inf");
  }
  const ParamSet& p = model.params;

  ForwardResult out;
  ForwardCache& c = out.cache;
  c.a_hat = a_hat;
  c.x = &x;
  c.generation = model.generation;
  c.hidden = model.hidden;
  c.n_classes = model.n_classes;

  Eigen::MatrixXd xw = x * p.w1;
  c.z1.noalias() = a_hat * xw;
  c.z1.rowwise() += p.b1;
  c.h1 = c.z1.cwiseMax(0.0);
  if (dropout.rate > 0.0) {
    if (dropout.rng == nullptr) throw Error(ErrorKind::InvalidConfig, "dropout needs an rng");
    const double keep_scale = 1.0 / (1.0 - dropout.rate);
    c.dropout_mask.resize(c.h1.rows(), c.h1.cols());
    for (Eigen::Index j = 0; j < c.h1.cols(); ++j) {
      for (Eigen::Index i = 0; i < c.h1.rows(); ++i) {
        c.dropout_mask(i, j) = dropout.rng->uniform() >= dropout.rate ? keep_scale : 0.0;
      }
    }
    c.h1.array() *= c.dropout_mask.array();
  }
  Eigen::MatrixXd hw = c.h1 * p.w2;
  c.z2.noalias() = a_hat * hw;
  c.z2.rowwise() += p.b2;
  c.h2 = c.z2.cwiseMax(0.0);
  c.pooled = c.h2.colwise().mean();
  out.logits = c.pooled * p.w_out + p.b_out;
  return out;
}

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::RowVectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

LossResult softmax_cross_entropy(const Eigen::RowVectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(label) + " for " +
                                                std::to_string(logits.size()) + " classes");
  }
  if (!logits.allFinite()) throw Error(ErrorKind::NonFiniteInput, "logits contain NaN or Inf");
  const double top = logits.maxCoeff();
  const Eigen::RowVectorXd shifted = logits.array() - top;
  const double log_sum = std::log(shifted.array().exp().sum());
  LossResult out;
  out.loss = log_sum - shifted(label);
  out.dlogits = (shifted.array() - log_sum).exp();
  out.dlogits(label) -= 1.0;
  return out;
}

BackwardResult backward(const GcnModel& model, const ForwardCache& c,
                        const Eigen::RowVectorXd& dlogits, bool want_input_grad) {
  if (c.x == nullptr || c.generation != model.generation || c.hidden != model.hidden ||
      c.n_classes != model.n_classes) {
    throw Error(ErrorKind::StaleCache, "forward cache does not belong to the current model state");
  }
  if (dlogits.size() != model.n_classes) {
    throw Error(ErrorKind::ShapeMismatch, "dlogits has " + std::to_string(dlogits.size()) +
                                              " entries for " + std::to_string(model.n_classes) +
                                              " classes");
  }
  const ParamSet& p = model.params;
  const FeatureMatrix& x = *c.x;
  const double n = static_cast<double>(x.rows());

  BackwardResult out;
  Gradients& g = out.grads;
  g.b_out = dlogits;
  g.w_out = c.pooled.transpose() * dlogits;
  const Eigen::RowVectorXd dpooled = dlogits * p.w_out.transpose();

  Eigen::MatrixXd dz2 = (c.z2.array() > 0.0).cast<double>();
  dz2.array().rowwise() *= (dpooled / n).array();
  g.b2 = dz2.colwise().sum();
  const Eigen::MatrixXd dp2 = c.a_hat * dz2;  // Â is symmetric
  g.w2 = c.h1.transpose() * dp2;

  Eigen::MatrixXd dz1 = dp2 * p.w2.transpose();
  if (c.dropout_mask.size() != 0) dz1.array() *= c.dropout_mask.array();
  dz1.array() *= (c.z1.array() > 0.0).cast<double>();
  g.b1 = dz1.colwise().sum();
  const Eigen::MatrixXd dp1 = c.a_hat * dz1;
  g.w1.noalias() = x.transpose() * dp1;
  if (want_input_grad) out.input_grad = dp1 * p.w1.transpose();
  return out;
}

void adam_step(GcnModel& model, const Gradients& grads, AdamState& state) {
  if (!grads.same_shape(model.params) || !state.m.same_shape(model.params) ||
      !state.v.same_shape(model.params)) {
    throw Error(ErrorKind::ShapeMismatch, "gradient or optimizer state shape differs from model");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double lr = state.lr;
  const double eps = state.eps;

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
  };
  update(model.params.w1, grads.w1, state.m.w1, state.v.w1);
  update(model.params.b1, grads.b1, state.m.b1, state.v.b1);
  update(model.params.w2, grads.w2, state.m.w2, state.v.w2);
  update(model.params.b2, grads.b2, state.m.b2, state.v.b2);
  update(model.params.w_out, grads.w_out, state.m.w_out, state.v.w_out);
  update(model.params.b_out, grads.b_out, state.m.b_out, state.v.b_out);
  ++model.generation;
}

GcnModel init_model(int hidden, int n_classes, std::uint64_t seed, int in_dim) {
  if (hidden < 1) throw Error(ErrorKind::InvalidDims, "hidden must be >= 1");
  if (n_classes != 2 && n_classes != 3) throw Error(ErrorKind::InvalidDims, "n_classes must be 2 or 3");
  if (in_dim < 1) throw Error(ErrorKind::InvalidDims, "in_dim must be >= 1");

  GcnModel model;
  model.in_dim = in_dim;
  model.hidden = hidden;
  model.n_classes = n_classes;
  model.init_seed = seed;

  Rng rng(seed);
  auto glorot = [&rng](Eigen::Index fan_in, Eigen::Index fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < fan_in; ++i) {
      for (Eigen::Index j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-bound, bound);
    }
    return w;
  };
  model.params.w1 = glorot(in_dim, hidden);
  model.params.b1 = Eigen::RowVectorXd::Zero(hidden);
  model.params.w2 = glorot(hidden, hidden);
  model.params.b2 = Eigen::RowVectorXd::Zero(hidden);
  model.params.w_out = glorot(hidden, n_classes);
  model.params.b_out = Eigen::RowVectorXd::Zero(n_classes);
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json tensor_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json params_json(const ParamSet& p) {
  json out = json::object();
  p.for_each([&](const char* name, const Eigen::MatrixXd& m) { out[name] = tensor_json(m); });
  return out;
}

void read_params(const json& doc, ParamSet& p, const ParamSet& shape_of) {
  p = ParamSet::zeros_like(shape_of);
  p.for_each([&](const char* name, Eigen::Ref<Eigen::MatrixXd> m) {
    const json& t = doc.at(name);
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const json& data = t.at("data");
    if (rows != m.rows() || cols != m.cols() || data.size() != static_cast<std::size_t>(rows * cols)) {
      throw Error(ErrorKind::SchemaViolation, std::string("checkpoint tensor ") + name +
                                                  " has the wrong shape");
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[k++].get<double>();
    }
  });
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const GcnModel& m = ck.model;
  json doc = {{"format", "seegnn-gcn-checkpoint"},
              {"version", kCheckpointVersion},
              {"in_dim", m.in_dim},
              {"hidden", m.hidden},
              {"n_classes", m.n_classes},
              {"init_seed", m.init_seed},
              {"generation", m.generation},
              {"meta", ck.meta},
              {"params", params_json(m.params)},
              {"adam",
               {{"t", ck.adam.t},
                {"lr", ck.adam.lr},
                {"beta1", ck.adam.beta1},
                {"beta2", ck.adam.beta2},
                {"eps", ck.adam.eps},
                {"m", params_json(ck.adam.m)},
                {"v", params_json(ck.adam.v)}}}};
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, tmp.string() + ": cannot open for writing");
    out << doc.dump() << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoFailure, path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, path.string() + ": invalid checkpoint JSON");
  }
  if (!doc.is_object() || !doc.contains("version")) {
    throw Error(ErrorKind::SchemaViolation, path.string() + ": missing version");
  }
  const json& version = doc["version"];
  if (!version.is_number_integer() || version.get<int>() != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch, path.string() + ": checkpoint version " + version.dump() +
                                                ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  try {
    const int in_dim = doc.at("in_dim").get<int>();
    const int hidden = doc.at("hidden").get<int>();
    const int n_classes = doc.at("n_classes").get<int>();
    const auto seed = doc.at("init_seed").get<std::uint64_t>();
    GcnModel shape = init_model(hidden, n_classes, 0, in_dim);
    ck.model.in_dim = in_dim;
    ck.model.hidden = hidden;
    ck.model.n_classes = n_classes;
    ck.model.init_seed = seed;
    ck.model.generation = doc.at("generation").get<std::uint64_t>();
    read_params(doc.at("params"), ck.model.params, shape.params);
    const json& adam = doc.at("adam");
    ck.adam.t = adam.at("t").get<std::int64_t>();
    ck.adam.lr = adam.at("lr").get<double>();
    ck.adam.beta1 = adam.at("beta1").get<double>();
    ck.adam.beta2 = adam.at("beta2").get<double>();
    ck.adam.eps = adam.at("eps").get<double>();
    read_params(adam.at("m"), ck.adam.m, shape.params);
    read_params(adam.at("v"), ck.adam.v, shape.params);
    ck.meta = doc.at("meta").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidDims) throw Error(ErrorKind::SchemaViolation, e.detail());
    throw;
  }
  if (!ck.model.params.all_finite()) {
    throw Error(ErrorKind::SchemaViolation, path.string() + ": non-finite parameters");
  }
  return ck;
}

}  // namespace seegnn
