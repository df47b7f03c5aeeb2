#include "rest/nn.hpp"

namespace rest::nn {

void Mlp::init(Rng& rng) {
  auto fill = [&](Mat& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  };
  fill(w1);
  fill(w2);
  b1.setZero();
  b2.setZero();
}

Vec forward(const Mlp& mlp, const Vec& x, MlpCache* cache) {
  Vec pre = mlp.w1 * x + mlp.b1;
  Vec hidden = leaky_relu(pre);
  Vec y = mlp.w2 * hidden + mlp.b2;
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

Vec backward(const Mlp& mlp, const MlpCache& cache, const Vec& dy, Mlp& grad) {
  grad.w2.noalias() += dy * cache.hidden.transpose();
  grad.b2 += dy;
  Vec dpre = leaky_relu_backward(cache.pre, mlp.w2.transpose() * dy);
  grad.w1.noalias() += dpre * cache.x.transpose();
  grad.b1 += dpre;
  return mlp.w1.transpose() * dpre;
}

Vec attention_forward(const Mlp& scorer, const Vec& query, const Mat& keys, const Mat& values,
                      AttentionCache* cache) {
  const auto q = query.size();
  Vec query_part = scorer.w1.leftCols(q) * query + scorer.b1;
  Mat pre = scorer.w1.rightCols(keys.rows()) * keys;
  pre.colwise() += query_part;
  Mat hidden = leaky_relu(pre);
  Eigen::RowVectorXd scores = scorer.w2.row(0) * hidden;
  scores.array() += scorer.b2(0);

  const double max_score = scores.maxCoeff();
  Vec weights = (scores.array() - max_score).exp().transpose();
  weights /= weights.sum();
  Vec pooled = values * weights;
  Vec h = leaky_relu(pooled);
  if (cache) {
    cache->query = query;
    cache->keys = keys;
    cache->values = values;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->weights = std::move(weights);
    cache->pooled = std::move(pooled);
  }
  return h;
}

AttentionGrad attention_backward(const Mlp& scorer, const AttentionCache& c, const Vec& dh, Mlp& grad) {
  const auto q = c.query.size();
  const auto k = c.keys.rows();
  AttentionGrad out;

  Vec dpooled = leaky_relu_backward(c.pooled, dh);
  out.values = dpooled * c.weights.transpose();
  Vec dweights = c.values.transpose() * dpooled;
  const double mean = c.weights.dot(dweights);
  Eigen::RowVectorXd dscores = (c.weights.array() * (dweights.array() - mean)).matrix().transpose();

  grad.w2.row(0).noalias() += dscores * c.hidden.transpose();
  grad.b2(0) += dscores.sum();
  Mat dpre = leaky_relu_backward(c.pre, scorer.w2.row(0).transpose() * dscores);
  Vec dpre_sum = dpre.rowwise().sum();

  grad.w1.rightCols(k).noalias() += dpre * c.keys.transpose();
  grad.w1.leftCols(q).noalias() += dpre_sum * c.query.transpose();
  grad.b1 += dpre_sum;
  out.keys = scorer.w1.rightCols(k).transpose() * dpre;
  out.query = scorer.w1.leftCols(q).transpose() * dpre_sum;
  return out;
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const double m = logits.row(b).maxCoeff();
    out.row(b) = (logits.row(b).array() - m).exp();
    out.row(b) /= out.row(b).sum();
  }
  return out;
}

}  // namespace rest::nn
