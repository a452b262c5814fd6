// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/waus_head.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "buzzdef/digest.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/random.hpp"

namespace buzzdef::waus {

namespace {

constexpr const char* kMagic = "buzzdef-waus-head v1";

template <typename M>
void fill_uniform(M& m, double bound, DeterministicRng& rng) {
  // Column-major fill order, matching flatten().
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

template <typename M>
void append(std::vector<double>& out, const M& m) {
  out.insert(out.end(), m.data(), m.data() + m.size());
}

template <typename M>
std::size_t take(const std::vector<double>& p, std::size_t at, M& m) {
  std::copy(p.begin() + static_cast<std::ptrdiff_t>(at),
            p.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(m.size())),
            m.data());
  return at + static_cast<std::size_t>(m.size());
}

void write_block(std::string& out, const char* name, const Matrix& m) {
  char buf[40];
  out += name;
  out += ' ';
  out += std::to_string(m.rows());
  out += ' ';
  out += std::to_string(m.cols());
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%a", m(i, j));
      if (j) out += ' ';
      out += buf;
    }
    out += '\n';
  }
}

Matrix read_block(std::istringstream& in, const char* name, Eigen::Index rows, Eigen::Index cols) {
  std::string tag;
  Eigen::Index r = 0, c = 0;
  if (!(in >> tag >> r >> c) || tag != name)
    throw std::runtime_error(std::string("checkpoint: expected block ") + name);
  if (r != rows || c != cols)
    throw std::runtime_error(std::string("checkpoint: shape mismatch in ") + name);
  Matrix m(rows, cols);
  std::string tok;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated block " + std::string(name));
      char* end = nullptr;
      m(i, j) = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw std::runtime_error("checkpoint: bad number '" + tok + "'");
    }
  }
  return m;
}

Vector sigmoid(const Vector& z) {
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = z[i];
    out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

struct AdamState {
  HeadGradients m, v;
  explicit AdamState(const HeadDims& d) {
    for (auto* s : {&m, &v}) {
      s->W1 = Matrix::Zero(d.hidden1, d.input);
      s->b1 = Vector::Zero(d.hidden1);
      s->W2 = Matrix::Zero(d.hidden2, d.hidden1);
      s->b2 = Vector::Zero(d.hidden2);
      s->w3 = Vector::Zero(d.hidden2);
      s->b3 = 0.0;
    }
  }
};

struct StepConsts {
  double lr, wd, b1, b2, eps, c1, c2;
};

template <typename P>
void adamw(P& p, const P& g, P& m, P& v, const StepConsts& k) {
  p *= (1.0 - k.lr * k.wd);
  m = k.b1 * m + (1.0 - k.b1) * g;
  v = k.b2 * v + (1.0 - k.b2) * g.cwiseProduct(g);
  p -= (k.lr * (m / k.c1).array() / ((v / k.c2).array().sqrt() + k.eps)).matrix();
}

void adamw_scalar(double& p, double g, double& m, double& v, const StepConsts& k) {
  p *= (1.0 - k.lr * k.wd);
  m = k.b1 * m + (1.0 - k.b1) * g;
  v = k.b2 * v + (1.0 - k.b2) * g * g;
  p -= k.lr * (m / k.c1) / (std::sqrt(v / k.c2) + k.eps);
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, DeterministicRng& rng) {
  Matrix m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform01() < rate ? 0.0 : keep_scale;
  return m;
}

}  // namespace

WausHead WausHead::zeros(const HeadDims& d) {
  WausHead h;
  h.dims = d;
  h.W1 = Matrix::Zero(d.hidden1, d.input);
  h.b1 = Vector::Zero(d.hidden1);
  h.W2 = Matrix::Zero(d.hidden2, d.hidden1);
  h.b2 = Vector::Zero(d.hidden2);
  h.w3 = Vector::Zero(d.hidden2);
  h.b3 = 0.0;
  return h;
}

WausHead WausHead::init(const HeadDims& d, std::uint64_t seed) {
  WausHead h = zeros(d);
  DeterministicRng rng(derive_seed(seed, "waus-init"));
  const double k1 = 1.0 / std::sqrt(static_cast<double>(d.input));
  const double k2 = 1.0 / std::sqrt(static_cast<double>(d.hidden1));
  const double k3 = 1.0 / std::sqrt(static_cast<double>(d.hidden2));
  fill_uniform(h.W1, k1, rng);
  fill_uniform(h.b1, k1, rng);
  fill_uniform(h.W2, k2, rng);
  fill_uniform(h.b2, k2, rng);
  fill_uniform(h.w3, k3, rng);
  h.b3 = rng.uniform(-k3, k3);
  return h;
}

double WausHead::logit(const Vector& x) const {
  const Vector h1 = (W1 * x + b1).cwiseMax(0.0);
  const Vector h2 = (W2 * h1 + b2).cwiseMax(0.0);
  return w3.dot(h2) + b3;
}

Vector WausHead::logits(const Matrix& X) const {
  const Matrix h1 = ((W1 * X).colwise() + b1).cwiseMax(0.0);
  const Matrix h2 = ((W2 * h1).colwise() + b2).cwiseMax(0.0);
  return (w3.transpose() * h2).transpose().array() + b3;
}

std::size_t WausHead::parameter_count() const {
  return static_cast<std::size_t>(W1.size() + b1.size() + W2.size() + b2.size() + w3.size() + 1);
}

std::vector<double> WausHead::flatten() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  append(p, W1);
  append(p, b1);
  append(p, W2);
  append(p, b2);
  append(p, w3);
  p.push_back(b3);
  return p;
}

void WausHead::unflatten(const std::vector<double>& p) {
  if (p.size() != parameter_count()) throw std::invalid_argument("parameter vector size mismatch");
  std::size_t at = 0;
  at = take(p, at, W1);
  at = take(p, at, b1);
  at = take(p, at, W2);
  at = take(p, at, b2);
  at = take(p, at, w3);
  b3 = p[at];
}

bool WausHead::all_finite() const {
  return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite() && w3.allFinite() &&
         std::isfinite(b3);
}

bool WausHead::operator==(const WausHead& o) const {
  return dims == o.dims && flatten() == o.flatten();
}

std::string WausHead::serialize() const {
  std::string out = kMagic;
  out += "\ndims " + std::to_string(dims.input) + " " + std::to_string(dims.hidden1) + " " +
         std::to_string(dims.hidden2) + "\n";
  write_block(out, "W1", W1);
  write_block(out, "b1", b1);
  write_block(out, "W2", W2);
  write_block(out, "b2", b2);
  write_block(out, "w3", w3);
  write_block(out, "b3", Matrix::Constant(1, 1, b3));
  return out;
}

WausHead WausHead::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != kMagic) throw std::runtime_error("checkpoint: unrecognized header");
  std::string tag;
  HeadDims d;
  if (!(in >> tag >> d.input >> d.hidden1 >> d.hidden2) || tag != "dims")
    throw std::runtime_error("checkpoint: missing dims");
  WausHead h = zeros(d);
  const auto i = static_cast<Eigen::Index>(d.input), h1 = static_cast<Eigen::Index>(d.hidden1),
             h2 = static_cast<Eigen::Index>(d.hidden2);
  h.W1 = read_block(in, "W1", h1, i);
  h.b1 = read_block(in, "b1", h1, 1);
  h.W2 = read_block(in, "W2", h2, h1);
  h.b2 = read_block(in, "b2", h2, 1);
  h.w3 = read_block(in, "w3", h2, 1);
  h.b3 = read_block(in, "b3", 1, 1)(0, 0);
  return h;
}

void WausHead::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

WausHead WausHead::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string WausHead::digest() const { return sha256_hex(serialize()).substr(0, 16); }

std::vector<double> HeadGradients::flatten() const {
  std::vector<double> p;
  append(p, W1);
  append(p, b1);
  append(p, W2);
  append(p, b2);
  append(p, w3);
  p.push_back(b3);
  return p;
}

double loss_and_gradient(const WausHead& h, const Matrix& X, const Vector& y, HeadGradients* grad,
                         const DropoutMasks* masks) {
  const auto n = X.cols();
  if (n == 0) throw std::invalid_argument("empty batch");
  const Matrix a1 = (h.W1 * X).colwise() + h.b1;
  Matrix h1 = a1.cwiseMax(0.0);
  if (masks) h1 = h1.cwiseProduct(masks->m1);
  const Matrix a2 = (h.W2 * h1).colwise() + h.b2;
  Matrix h2 = a2.cwiseMax(0.0);
  if (masks) h2 = h2.cwiseProduct(masks->m2);
  const Vector z = (h.w3.transpose() * h2).transpose().array() + h.b3;

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = z[i];
    loss += std::max(zi, 0.0) - zi * y[i] + std::log1p(std::exp(-std::fabs(zi)));
  }
  loss /= static_cast<double>(n);
  if (!grad) return loss;

  const Vector dz = (sigmoid(z) - y) / static_cast<double>(n);
  grad->w3 = h2 * dz;
  grad->b3 = dz.sum();
  Matrix da2 = h.w3 * dz.transpose();
  if (masks) da2 = da2.cwiseProduct(masks->m2);
  da2 = da2.cwiseProduct((a2.array() > 0.0).cast<double>().matrix());
  grad->W2 = da2 * h1.transpose();
  grad->b2 = da2.rowwise().sum();
  Matrix da1 = h.W2.transpose() * da2;
  if (masks) da1 = da1.cwiseProduct(masks->m1);
  da1 = da1.cwiseProduct((a1.array() > 0.0).cast<double>().matrix());
  grad->W1 = da1 * X.transpose();
  grad->b1 = da1.rowwise().sum();
  return loss;
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0) || !(c.weight_decay >= 0) || c.batch_size == 0)
    throw std::invalid_argument("learning rate and batch size must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
  if (c.dims.input == 0 || c.dims.hidden1 == 0 || c.dims.hidden2 == 0)
    throw std::invalid_argument("head dimensions must be positive");
}

double accuracy(const WausHead& head, const Matrix& X, const Vector& y) {
  if (X.cols() == 0) return 0.0;
  const Vector z = head.logits(X);
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) ok += ((z[i] > 0.0) == (y[i] > 0.5)) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(z.size());
}

TrainResult train_head(const Matrix& X, const Vector& y, const TrainConfig& cfg,
                       Validation validation) {
  validate(cfg);
  if (static_cast<std::size_t>(X.rows()) != cfg.dims.input)
    throw TrainingError("embedding dimension " + std::to_string(X.rows()) +
                        " does not match head input " + std::to_string(cfg.dims.input));
  if (X.cols() != y.size()) throw TrainingError("label count does not match example count");
  TrainResult r;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y[i] > 0.5 ? r.n_positive : r.n_negative)++;
  if (r.n_positive == 0 || r.n_negative == 0)
    throw TrainingError("training data must contain both labels");

  r.head = WausHead::init(cfg.dims, cfg.seed);
  r.head.dropout_rate = cfg.dropout;
  AdamState st(cfg.dims);
  DeterministicRng dropout_rng(derive_seed(cfg.seed, "waus-dropout"));
  const auto n = static_cast<std::size_t>(X.cols());
  std::size_t t = 0;
  HeadGradients g;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    DeterministicRng shuffle_rng(derive_seed(cfg.seed, "waus-shuffle-" + std::to_string(epoch)));
    const auto order = shuffle_rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const auto bn = static_cast<Eigen::Index>(end - start);
      Matrix Xb(X.rows(), bn);
      Vector yb(bn);
      for (Eigen::Index c = 0; c < bn; ++c) {
        const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(c)]);
        Xb.col(c) = X.col(src);
        yb[c] = y[src];
      }
      DropoutMasks masks;
      const DropoutMasks* mp = nullptr;
      if (cfg.dropout > 0.0) {
        masks.m1 = dropout_mask(r.head.W1.rows(), bn, cfg.dropout, dropout_rng);
        masks.m2 = dropout_mask(r.head.W2.rows(), bn, cfg.dropout, dropout_rng);
        mp = &masks;
      }
      const double loss = loss_and_gradient(r.head, Xb, yb, &g, mp);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no) + " (examples " + std::to_string(start) +
                            ".." + std::to_string(end - 1) + ")");
      loss_sum += loss * static_cast<double>(bn);

      ++t;
      const StepConsts k{cfg.learning_rate,
                         cfg.weight_decay,
                         cfg.beta1,
                         cfg.beta2,
                         cfg.eps,
                         1.0 - std::pow(cfg.beta1, static_cast<double>(t)),
                         1.0 - std::pow(cfg.beta2, static_cast<double>(t))};
      adamw(r.head.W1, g.W1, st.m.W1, st.v.W1, k);
      adamw(r.head.b1, g.b1, st.m.b1, st.v.b1, k);
      adamw(r.head.W2, g.W2, st.m.W2, st.v.W2, k);
      adamw(r.head.b2, g.b2, st.m.b2, st.v.b2, k);
      adamw(r.head.w3, g.w3, st.m.w3, st.v.w3, k);
      adamw_scalar(r.head.b3, g.b3, st.m.b3, st.v.b3, k);
    }
    if (!r.head.all_finite())
      throw TrainingError("non-finite weights after epoch " + std::to_string(epoch));
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = loss_sum / static_cast<double>(n);
    e.eval_loss = loss_and_gradient(r.head, X, y, nullptr);
    e.accuracy = accuracy(r.head, X, y);
    if (validation.X && validation.y && validation.X->cols() > 0) {
      e.val_loss = loss_and_gradient(r.head, *validation.X, *validation.y, nullptr);
      e.val_accuracy = accuracy(r.head, *validation.X, *validation.y);
    }
    r.log.push_back(e);
  }
  return r;
}

}  // namespace buzzdef::waus
