// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gspace/error.hpp"
#include "gspace/rng.hpp"

namespace gspace {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear_regression: return "linear-regression";
    case ModelKind::logistic: return "logistic";
    case ModelKind::two_layer_mlp: return "two-layer-mlp";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear-regression" || s == "linear") return ModelKind::linear_regression;
  if (s == "logistic") return ModelKind::logistic;
  if (s == "two-layer-mlp" || s == "mlp") return ModelKind::two_layer_mlp;
  throw ValidationError("unknown model '" + s + "' (expected linear-regression, logistic or two-layer-mlp)");
}

const char* to_string(TargetMode mode) {
  return mode == TargetMode::task_direction ? "task-direction" : "input-linear";
}

TargetMode target_mode_from_string(const std::string& s) {
  if (s == "task-direction") return TargetMode::task_direction;
  if (s == "input-linear") return TargetMode::input_linear;
  throw ValidationError("unknown target_mode '" + s + "' (expected task-direction or input-linear)");
}

void SimConfig::validate() const {
  if (num_tasks < 1) throw ValidationError("num_tasks must be >= 1");
  if (input_dim < 1 || output_dim < 1 || hidden_dim < 1) throw ValidationError("model dimensions must be >= 1");
  if (examples_per_task < 1) throw ValidationError("examples_per_task must be >= 1");
  if (!(mode_separation >= -1.0 && mode_separation <= 1.0)) throw ValidationError("mode_separation must lie in [-1, 1]");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  if (!(lr > 0.0)) throw ValidationError("lr must be > 0");
  if (steps < 1) throw ValidationError("steps must be >= 1");
  if (!(warmup_fraction > 0.0 && warmup_fraction <= 1.0)) throw ValidationError("warmup_fraction must lie in (0, 1]");
  if (!(input_signal >= 0.0 && input_noise >= 0.0 && input_nuisance >= 0.0))
    throw ValidationError("input signal/noise/nuisance scales must be >= 0");
  if (!(input_scale > 0.0)) throw ValidationError("input_scale must be > 0");
  if (!(grad_scale > 0.0)) throw ValidationError("grad_scale must be > 0");
  if (!(text_signal >= 0.0 && text_signal <= 1.0)) throw ValidationError("text_signal must lie in [0, 1]");
  if (target_mode == TargetMode::input_linear && output_dim < input_dim)
    throw ValidationError("input-linear targets need output_dim >= input_dim");
}

// ----------------------------------------------------------------- ToyModel

ToyModel::ToyModel(ModelKind kind, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_dim)
    : kind_(kind), in_(input_dim), out_(output_dim), hidden_(hidden_dim) {
  if (in_ == 0 || out_ == 0 || hidden_ == 0) throw ValidationError("model dimensions must be >= 1");
}

std::size_t ToyModel::param_count() const {
  if (kind_ == ModelKind::two_layer_mlp) return hidden_ * (in_ + 1) + out_ * (hidden_ + 1);
  return out_ * (in_ + 1);
}

namespace {

using RowMap = Eigen::Map<const Matrix>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Vector normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

Matrix normal_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

// n x r matrix with orthonormal columns.
Matrix random_orthonormal(Rng& rng, Eigen::Index n, Eigen::Index r) {
  Eigen::MatrixXd g = normal_matrix(rng, n, r);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  return q;
}

}  // namespace

void ToyModel::check(const Vector& theta, const Vector& x) const {
  if (static_cast<std::size_t>(theta.size()) != param_count())
    throw ValidationError("parameter vector has " + std::to_string(theta.size()) + " entries, model needs " +
                          std::to_string(param_count()));
  if (static_cast<std::size_t>(x.size()) != in_)
    throw ValidationError("input has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(in_));
}

Vector ToyModel::init_params(std::uint64_t seed) const {
  Vector theta = Vector::Zero(static_cast<Eigen::Index>(param_count()));
  if (kind_ != ModelKind::two_layer_mlp) return theta;
  Rng rng(derive_seed(seed, "model.init"));
  std::normal_distribution<double> nd(0.0, 1.0);
  const auto h = static_cast<Eigen::Index>(hidden_), p = static_cast<Eigen::Index>(in_),
             o = static_cast<Eigen::Index>(out_);
  Eigen::Index off = 0;
  for (Eigen::Index i = 0; i < h * p; ++i) theta[off + i] = nd(rng) / std::sqrt(static_cast<double>(p));
  off += h * p + h;
  for (Eigen::Index i = 0; i < o * h; ++i) theta[off + i] = nd(rng) / std::sqrt(static_cast<double>(h));
  return theta;
}

Vector ToyModel::forward(const Vector& theta, const Vector& x) const {
  check(theta, x);
  const auto p = static_cast<Eigen::Index>(in_), o = static_cast<Eigen::Index>(out_),
             h = static_cast<Eigen::Index>(hidden_);
  if (kind_ != ModelKind::two_layer_mlp) {
    RowMap w(theta.data(), o, p);
    VecMap b(theta.data() + o * p, o);
    return w * x + b;
  }
  RowMap w1(theta.data(), h, p);
  VecMap b1(theta.data() + h * p, h);
  RowMap w2(theta.data() + h * p + h, o, h);
  VecMap b2(theta.data() + h * p + h + o * h, o);
  const Vector hidden = (w1 * x + b1).array().tanh().matrix();
  return w2 * hidden + b2;
}

double ToyModel::loss(const Vector& theta, const Vector& x, const Vector& y) const {
  if (static_cast<std::size_t>(y.size()) != out_) throw ValidationError("target dimension mismatch");
  const Vector f = forward(theta, x);
  if (kind_ == ModelKind::logistic) {
    double l = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) l += softplus(f[j]) - y[j] * f[j];
    return l;
  }
  return 0.5 * (f - y).squaredNorm();
}

Vector ToyModel::gradient(const Vector& theta, const Vector& x, const Vector& y) const {
  if (static_cast<std::size_t>(y.size()) != out_) throw ValidationError("target dimension mismatch");
  check(theta, x);
  const auto p = static_cast<Eigen::Index>(in_), o = static_cast<Eigen::Index>(out_),
             h = static_cast<Eigen::Index>(hidden_);
  Vector g(static_cast<Eigen::Index>(param_count()));

  if (kind_ != ModelKind::two_layer_mlp) {
    const Vector f = forward(theta, x);
    Vector r(o);
    if (kind_ == ModelKind::logistic)
      for (Eigen::Index j = 0; j < o; ++j) r[j] = sigmoid(f[j]) - y[j];
    else
      r = f - y;
    Eigen::Map<Matrix>(g.data(), o, p) = r * x.transpose();
    g.segment(o * p, o) = r;
    return g;
  }

  RowMap w1(theta.data(), h, p);
  VecMap b1(theta.data() + h * p, h);
  RowMap w2(theta.data() + h * p + h, o, h);
  VecMap b2(theta.data() + h * p + h + o * h, o);
  const Vector hidden = (w1 * x + b1).array().tanh().matrix();
  const Vector r = w2 * hidden + b2 - y;
  const Vector dz1 = ((w2.transpose() * r).array() * (1.0 - hidden.array().square())).matrix();
  Eigen::Index off = 0;
  Eigen::Map<Matrix>(g.data(), h, p) = dz1 * x.transpose();
  off += h * p;
  g.segment(off, h) = dz1;
  off += h;
  Eigen::Map<Matrix>(g.data() + off, o, h) = r * hidden.transpose();
  off += o * h;
  g.segment(off, o) = r;
  return g;
}

// --------------------------------------------------------------- generation

std::string task_tag(std::size_t task) { return "task" + std::to_string(task); }

namespace {

const std::vector<std::vector<std::string>>& builtin_vocabularies() {
  static const std::vector<std::vector<std::string>> v = {
      {"stock", "market", "tax", "invest", "dividend", "portfolio", "bond", "interest", "revenue", "equity", "loan",
       "budget"},
      {"def", "return", "int", "function", "class", "loop", "array", "string", "compile", "variable", "pointer",
       "import"},
      {"equation", "solve", "integral", "prime", "triangle", "derivative", "matrix", "probability", "sum", "proof",
       "angle", "fraction"},
      {"story", "poem", "character", "dragon", "night", "dream", "ocean", "journey", "whisper", "castle", "song",
       "forest"},
  };
  return v;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> v = {"the", "please", "explain", "write", "what", "how", "give",
                                             "example", "short", "answer", "about", "make"};
  return v;
}

// Rows are m unit vectors in R^out with pairwise cosine exactly c.
Matrix equiangular_directions(std::size_t m, std::size_t out, double c, Rng& rng) {
  const auto mm = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Constant(mm, mm, c);
  gram.diagonal().setOnes();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const auto& lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-10)
    throw ValidationError("mode_separation " + std::to_string(c) + " is infeasible for " + std::to_string(m) +
                          " tasks (needs >= " + std::to_string(m > 1 ? -1.0 / static_cast<double>(m - 1) : -1.0) +
                          ")");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] > 1e-10) keep.push_back(i);
  const auto rank = static_cast<Eigen::Index>(keep.size());
  if (static_cast<std::size_t>(rank) > out)
    throw ValidationError(std::to_string(m) + " task directions with separation " + std::to_string(c) + " need " +
                          std::to_string(rank) + " dimensions, output_dim is " + std::to_string(out));
  Eigen::MatrixXd factor(mm, rank);
  for (Eigen::Index j = 0; j < rank; ++j) factor.col(j) = es.eigenvectors().col(keep[j]) * std::sqrt(lam[keep[j]]);
  const Matrix basis = random_orthonormal(rng, static_cast<Eigen::Index>(out), rank);
  Matrix dirs = factor * basis.transpose();
  for (Eigen::Index i = 0; i < dirs.rows(); ++i) dirs.row(i).normalize();
  return dirs;
}

Vector make_target(const ToyModel& model, const Vector& theta0, const Vector& x, const Vector& residual) {
  const Vector f = model.forward(theta0, x);
  if (model.kind() == ModelKind::logistic) {
    Vector y(f.size());
    for (Eigen::Index j = 0; j < f.size(); ++j) y[j] = std::clamp(sigmoid(f[j]) - residual[j], 0.0, 1.0);
    return y;
  }
  return f - residual;
}

}  // namespace

Dataset gen_mixture(const SimConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, "sim.generate");
  ToyModel model(cfg.model, cfg.input_dim, cfg.output_dim, cfg.hidden_dim);
  Dataset data{cfg, model, model.init_params(derive_seed(cfg.seed, "sim.model")), {}, {}, {}, {}, {}};
  const auto m = static_cast<Eigen::Index>(cfg.num_tasks);
  const auto p = static_cast<Eigen::Index>(cfg.input_dim);
  const auto o = static_cast<Eigen::Index>(cfg.output_dim);

  // Input codes: orthonormal when there is room, otherwise random unit vectors.
  if (cfg.input_dim >= cfg.num_tasks) {
    data.input_codes = random_orthonormal(rng, p, m).transpose();
  } else {
    data.input_codes = normal_matrix(rng, m, p);
    data.input_codes.rowwise().normalize();
  }
  const Vector nuisance_dir = normal_vector(rng, p).normalized();

  Matrix image;  // input-linear mode: output = image * input, orthonormal columns
  if (cfg.target_mode == TargetMode::input_linear) {
    image = random_orthonormal(rng, o, p);
    data.output_directions = data.input_codes * image.transpose();
    data.output_directions.rowwise().normalize();
  } else {
    data.output_directions = equiangular_directions(cfg.num_tasks, cfg.output_dim, cfg.mode_separation, rng);
  }

  const auto& builtin = builtin_vocabularies();
  for (std::size_t t = 0; t < cfg.num_tasks; ++t) {
    if (t < builtin.size()) {
      data.vocabularies.push_back(builtin[t]);
    } else {
      std::vector<std::string> words;
      for (int w = 0; w < 12; ++w) words.push_back("topic" + std::to_string(t) + "w" + std::to_string(w));
      data.vocabularies.push_back(std::move(words));
    }
  }

  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));
  for (std::size_t t = 0; t < cfg.num_tasks; ++t) {
    for (std::size_t e = 0; e < cfg.examples_per_task; ++e) {
      Example ex;
      ex.task = t;
      const Vector x_hat = cfg.input_signal * data.input_codes.row(static_cast<Eigen::Index>(t)).transpose() +
                           cfg.input_noise * inv_sqrt_p * normal_vector(rng, p) +
                           cfg.input_nuisance * nd(rng) * nuisance_dir;
      ex.input = cfg.input_scale * x_hat;
      Vector dir = cfg.target_mode == TargetMode::input_linear
                       ? Vector(image * x_hat)
                       : Vector(data.output_directions.row(static_cast<Eigen::Index>(t)).transpose());
      const Vector residual = cfg.grad_scale * (dir + cfg.noise_sigma * normal_vector(rng, o));
      ex.target = make_target(model, data.theta0, ex.input, residual);

      std::string text;
      for (std::size_t w = 0; w < cfg.words_per_example; ++w) {
        const double u = unif(rng);
        const std::vector<std::string>* pool = &filler_words();
        if (u < cfg.text_signal) {
          pool = &data.vocabularies[t];
        } else if (cfg.num_tasks > 1 && u < cfg.text_signal + 0.5 * (1.0 - cfg.text_signal)) {
          std::uniform_int_distribution<std::size_t> other(0, cfg.num_tasks - 2);
          auto o_t = other(rng);
          if (o_t >= t) ++o_t;
          pool = &data.vocabularies[o_t];
        }
        std::uniform_int_distribution<std::size_t> pick(0, pool->size() - 1);
        if (!text.empty()) text.push_back(' ');
        text += (*pool)[pick(rng)];
      }
      ex.text = std::move(text);
      data.examples.push_back(std::move(ex));
    }
  }
  std::shuffle(data.examples.begin(), data.examples.end(), rng);
  for (std::size_t i = 0; i < data.examples.size(); ++i) data.examples[i].id = i;

  // Ground-truth gradient direction of each task's noise-free prototype.
  data.task_directions.resize(m, static_cast<Eigen::Index>(model.param_count()));
  for (Eigen::Index t = 0; t < m; ++t) {
    const Vector x_hat = cfg.input_signal * data.input_codes.row(t).transpose();
    const Vector x = cfg.input_scale * x_hat;
    const Vector dir = cfg.target_mode == TargetMode::input_linear ? Vector(image * x_hat)
                                                                   : Vector(data.output_directions.row(t).transpose());
    const Vector y = make_target(model, data.theta0, x, cfg.grad_scale * dir);
    const Vector g = model.gradient(data.theta0, x, y);
    const double n = g.norm();
    data.task_directions.row(t) = (n > 0 ? Vector(g / n) : g).transpose();
  }
  return data;
}

GradientRecord per_example_gradient(const ToyModel& model, const Vector& theta, const Example& example) {
  const double l = model.loss(theta, example.input, example.target);
  if (!std::isfinite(l))
    throw DegenerateError("non-finite loss for example " + std::to_string(example.id));
  GradientRecord rec{example.id, model.gradient(theta, example.input, example.target), task_tag(example.task),
                     example.text};
  if (!rec.vector.allFinite()) throw DegenerateError("non-finite gradient for example " + std::to_string(example.id));
  return rec;
}

std::vector<GradientRecord> extract_gradients(const Dataset& data, const Vector& theta) {
  std::vector<GradientRecord> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) out.push_back(per_example_gradient(data.model, theta, ex));
  return out;
}

Vector router_feature(const Example& example) {
  const double n = example.input.norm();
  if (n == 0.0) throw ZeroVectorError("example " + std::to_string(example.id) + " has a zero input");
  return example.input / n;
}

std::vector<GradientRecord> export_features(const Dataset& data) {
  std::vector<GradientRecord> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) out.push_back({ex.id, router_feature(ex), task_tag(ex.task), ex.text});
  return out;
}

double dataset_loss(const ToyModel& model, const Vector& theta, std::span<const Example> data) {
  if (data.empty()) throw ValidationError("loss over an empty dataset");
  double l = 0.0;
  for (const auto& ex : data) l += model.loss(theta, ex.input, ex.target);
  return l / static_cast<double>(data.size());
}

Vector full_gradient(const ToyModel& model, const Vector& theta, std::span<const Example> data) {
  if (data.empty()) throw ValidationError("gradient over an empty dataset");
  Vector g = Vector::Zero(static_cast<Eigen::Index>(model.param_count()));
  for (const auto& ex : data) g += model.gradient(theta, ex.input, ex.target);
  return g / static_cast<double>(data.size());
}

// ----------------------------------------------------------------- training

WarmupResult warmup_train(const ToyModel& model, const Vector& theta, std::span<const Example> data, double fraction,
                          std::size_t steps, double lr, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("warm-up fraction must lie in (0, 1]");
  if (data.empty()) throw ValidationError("warm-up on an empty dataset");
  if (!(lr > 0.0)) throw ValidationError("warm-up learning rate must be > 0");
  const auto n = data.size();
  const auto size = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "sim.warmup"));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(size);
  std::sort(order.begin(), order.end());

  std::vector<Example> subset;
  WarmupResult res{theta, {}, {}};
  for (auto i : order) {
    subset.push_back(data[i]);
    res.subset_ids.push_back(data[i].id);
  }
  res.losses.push_back(dataset_loss(model, res.params, subset));
  for (std::size_t s = 0; s < steps; ++s) {
    res.params -= lr * full_gradient(model, res.params, subset);
    const double l = dataset_loss(model, res.params, subset);
    if (!std::isfinite(l) || !res.params.allFinite())
      throw DegenerateError("warm-up diverged at step " + std::to_string(s) + "; try a smaller learning rate");
    res.losses.push_back(l);
  }
  return res;
}

TrainTrajectory sgd_train(const ToyModel& model, const Vector& theta0, std::span<const Example> data, double lr,
                          std::size_t steps, std::uint64_t seed) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
  if (steps < 1) throw ValidationError("SGD needs T >= 1 steps");
  if (data.empty()) throw ValidationError("SGD on an empty dataset");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  TrainTrajectory tr;
  tr.loss.reserve(steps);
  tr.grad_norm_sq.reserve(steps);
  Vector theta = theta0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double l = dataset_loss(model, theta, data);
    const double gn = full_gradient(model, theta, data).squaredNorm();
    if (!std::isfinite(l) || !std::isfinite(gn))
      throw DegenerateError("SGD diverged at step " + std::to_string(t) + "; try a smaller learning rate");
    tr.loss.push_back(l);
    tr.grad_norm_sq.push_back(gn);
    const auto& ex = data[pick(rng)];
    theta -= lr * model.gradient(theta, ex.input, ex.target);
  }
  tr.final_params = std::move(theta);
  KahanSum s;
  for (double v : tr.grad_norm_sq) s.add(v);
  tr.eps_hat = s.value() / static_cast<double>(steps);
  return tr;
}

ExpertComparison expert_vs_shared(const Dataset& data, const Vector& theta_start, std::span<const std::size_t> labels,
                                  std::size_t k) {
  const auto& cfg = data.config;
  if (labels.size() != data.examples.size()) throw ValidationError("expert_vs_shared: one label per example required");
  if (k == 0) throw ValidationError("expert_vs_shared: K must be >= 1");
  std::vector<std::vector<Example>> clusters(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw ValidationError("expert_vs_shared: label outside [0, K)");
    clusters[labels[i]].push_back(data.examples[i]);
  }
  for (std::size_t c = 0; c < k; ++c)
    if (clusters[c].empty()) throw DegenerateError("expert_vs_shared: cluster " + std::to_string(c) + " is empty");

  ExpertComparison cmp;
  cmp.eps_shared =
      sgd_train(data.model, theta_start, data.examples, cfg.lr, cfg.steps, derive_seed(cfg.seed, "sim.sgd.shared"))
          .eps_hat;
  const auto n = static_cast<double>(data.examples.size());
  KahanSum weighted;
  for (std::size_t c = 0; c < k; ++c) {
    const double eps = sgd_train(data.model, theta_start, clusters[c], cfg.lr, cfg.steps,
                                 derive_seed(cfg.seed, "sim.sgd.expert." + std::to_string(c)))
                           .eps_hat;
    const double w = static_cast<double>(clusters[c].size()) / n;
    cmp.expert_eps.push_back(eps);
    cmp.weights.push_back(w);
    weighted.add(w * eps);
  }
  cmp.eps_cluster_weighted = weighted.value();
  cmp.empirical_ratio = cmp.eps_cluster_weighted / cmp.eps_shared;
  cmp.improved = cmp.empirical_ratio <= 1.0;

  const auto grads = extract_gradients(data, theta_start);
  const auto gm = GradientMatrix::from_records(grads);
  cmp.variance = total_variance_decomposition(gm.rows(), labels, k);
  cmp.bound_ratio = stationarity_ratio(cmp.variance);
  return cmp;
}

nlohmann::ordered_json to_json(const ExpertComparison& c) {
  nlohmann::ordered_json j;
  j["eps_shared"] = c.eps_shared;
  j["eps_cluster_weighted"] = c.eps_cluster_weighted;
  j["empirical_ratio"] = c.empirical_ratio;
  j["bound_ratio"] = c.bound_ratio;
  j["empirical_ratio_le_1"] = c.improved;
  j["expert_eps"] = c.expert_eps;
  j["weights"] = c.weights;
  j["variance"] = to_json(c.variance);
  return j;
}

std::vector<std::size_t> random_balanced_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ValidationError("need K >= 1 groups");
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % k;
  Rng rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("pearson: length mismatch");
  if (a.size() < 2) throw DegenerateError("pearson: need at least two samples");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DegenerateError("pearson: a similarity list has zero variance");
  return sab / std::sqrt(saa * sbb);
}

CorrelationStudy embedding_vs_gradient_correlation(const Dataset& data, const Vector& theta, std::size_t n_pairs,
                                                   std::uint64_t seed) {
  if (n_pairs < 2) throw ValidationError("correlation study needs n_pairs >= 2");
  if (data.examples.size() < 2) throw DegenerateError("correlation study needs at least two examples");
  const auto grads = extract_gradients(data, theta);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.examples.size() - 1);
  CorrelationStudy st;
  for (std::size_t q = 0; q < n_pairs; ++q) {
    const auto i = pick(rng);
    auto j = pick(rng);
    while (j == i) j = pick(rng);
    st.input_similarity.push_back(cosine_similarity(data.examples[i].input, data.examples[j].input));
    st.gradient_similarity.push_back(cosine_similarity(grads[i].vector, grads[j].vector));
  }
  st.pearson_r = pearson(st.input_similarity, st.gradient_similarity);
  return st;
}

double cluster_purity(std::span<const std::size_t> labels, std::span<const std::size_t> truth) {
  if (labels.size() != truth.size()) throw ValidationError("purity: length mismatch");
  if (labels.empty()) throw DegenerateError("purity of an empty assignment");
  std::map<std::size_t, std::map<std::size_t, std::size_t>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) ++counts[labels[i]][truth[i]];
  std::size_t majority = 0;
  for (const auto& [_, c] : counts) {
    std::size_t best = 0;
    for (const auto& [__, v] : c) best = std::max(best, v);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(labels.size());
}

}  // namespace gspace
