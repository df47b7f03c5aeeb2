#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rest/rng.hpp"

namespace rest::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kLeakySlope = 0.2;

inline double leaky_relu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double leaky_relu_slope(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

template <typename Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived>& x) {
  return x.unaryExpr([](double v) { return leaky_relu(v); });
}

/// dy scaled by the LeakyReLU slope at each pre-activation.
template <typename A, typename B>
auto leaky_relu_backward(const Eigen::MatrixBase<A>& pre, const Eigen::MatrixBase<B>& dy) {
  return pre.unaryExpr([](double v) { return leaky_relu_slope(v); }).cwiseProduct(dy);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Binary cross-entropy of sigmoid(logit) against a target in [0, 1].
inline double bce_with_logit(double logit, double target) { return softplus(logit) - target * logit; }

/// Two-layer perceptron: Linear -> LeakyReLU -> Linear.
struct Mlp {
  Mat w1;  // hidden x in
  Vec b1;
  Mat w2;  // out x hidden
  Vec b2;

  Mlp() = default;
  Mlp(int in, int hidden, int out) : w1(Mat::Zero(hidden, in)), b1(Vec::Zero(hidden)), w2(Mat::Zero(out, hidden)), b2(Vec::Zero(out)) {}

  int in() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int out() const { return static_cast<int>(w2.rows()); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w1", w1);
    f(prefix + ".b1", b1);
    f(prefix + ".w2", w2);
    f(prefix + ".b2", b2);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".w1", w1);
    f(prefix + ".b1", b1);
    f(prefix + ".w2", w2);
    f(prefix + ".b2", b2);
  }
};

struct MlpCache {
  Vec x;
  Vec pre;
  Vec hidden;
};

Vec forward(const Mlp& mlp, const Vec& x, MlpCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` and returns dL/dx.
Vec backward(const Mlp& mlp, const MlpCache& cache, const Vec& dy, Mlp& grad);

/// Softmax-normalized attention pooling: h = LeakyReLU(sum_j a_j * values_j),
/// a = softmax_j(scorer([query; keys_j])).
///
/// Keys and values are stored as columns. The first `query.size()` input
/// columns of the scorer act on the query, the rest on a key.
struct AttentionCache {
  Vec query;
  Mat keys;
  Mat values;
  Mat pre;     // scorer hidden pre-activations, hidden x n
  Mat hidden;  // hidden x n
  Vec weights;
  Vec pooled;  // sum_j a_j values_j, before the activation
};

Vec attention_forward(const Mlp& scorer, const Vec& query, const Mat& keys, const Mat& values,
                      AttentionCache* cache = nullptr);

struct AttentionGrad {
  Vec query;
  Mat keys;
  Mat values;
};

AttentionGrad attention_backward(const Mlp& scorer, const AttentionCache& cache, const Vec& dh, Mlp& grad);

/// Row-wise softmax of a (blocks x categories) logit matrix.
Mat softmax_rows(const Mat& logits);

}  // namespace rest::nn
