#pragma once

// Loop-level re-implementation of the model's forward pass, written against the
// parameter tensors only. Tests compare the library against it.

#include <cmath>
#include <vector>

#include "rest/model.hpp"
#include "rest/rng.hpp"

namespace rest::reference {

using V = std::vector<double>;

inline double lrelu(double x) { return x > 0.0 ? x : 0.2 * x; }
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline V column(const Eigen::MatrixXd& m, Eigen::Index c) {
  V out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

inline V vec(const Eigen::VectorXd& v) { return V(v.data(), v.data() + v.size()); }

inline V cat(std::initializer_list<V> parts) {
  V out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline V mlp(const nn::Mlp& m, const V& x) {
  V h(static_cast<std::size_t>(m.w1.rows()));
  for (Eigen::Index i = 0; i < m.w1.rows(); ++i) {
    double a = m.b1(i);
    for (Eigen::Index j = 0; j < m.w1.cols(); ++j) a += m.w1(i, j) * x[static_cast<std::size_t>(j)];
    h[static_cast<std::size_t>(i)] = lrelu(a);
  }
  V y(static_cast<std::size_t>(m.w2.rows()));
  for (Eigen::Index i = 0; i < m.w2.rows(); ++i) {
    double a = m.b2(i);
    for (Eigen::Index j = 0; j < m.w2.cols(); ++j) a += m.w2(i, j) * h[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = a;
  }
  return y;
}

struct Attention {
  V h;
  V weights;
};

/// score_j = scorer([query; key_j]); weights = softmax(score); h = LeakyReLU(sum_j w_j value_j).
inline Attention attend(const nn::Mlp& scorer, const V& query, const std::vector<V>& keys, const std::vector<V>& values) {
  Attention a;
  V scores;
  for (const auto& k : keys) scores.push_back(mlp(scorer, cat({query, k}))[0]);
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  for (double s : scores) a.weights.push_back(std::exp(s - mx) / z);
  a.h.assign(values[0].size(), 0.0);
  for (std::size_t j = 0; j < values.size(); ++j)
    for (std::size_t i = 0; i < a.h.size(); ++i) a.h[i] += a.weights[j] * values[j][i];
  for (auto& x : a.h) x = lrelu(x);
  return a;
}

inline std::vector<V> item_messages(const ModelParameters& p, const std::vector<RatedItem>& items) {
  std::vector<V> out;
  for (const auto& ri : items)
    out.push_back(cat({column(p.item_embeddings, ri.item), column(p.rating_embeddings, ri.rating - 1)}));
  return out;
}

inline V bipartite(const ModelParameters& p, const UserContext& ctx, const nn::Mlp& scorer, const Eigen::VectorXd& empty) {
  if (ctx.items.empty()) return vec(empty);
  const auto msgs = item_messages(p, ctx.items);
  return attend(scorer, column(p.user_embeddings, ctx.user), msgs, msgs).h;
}

inline V social(const ModelParameters& p, const ModelConfig& cfg, const UserContext& ctx) {
  if (ctx.neighbors.empty()) return vec(p.empty_social);
  std::vector<V> keys, values;
  for (auto k : ctx.neighbors) {
    keys.push_back(column(p.user_embeddings, k));
    values.push_back(cfg.social_aggregation == SocialAggregation::kSelf ? column(p.user_embeddings, ctx.user)
                                                                        : column(p.user_embeddings, k));
  }
  return attend(p.social_scorer, column(p.user_embeddings, ctx.user), keys, values).h;
}

inline V user_latent(const ModelParameters& p, const ModelConfig& cfg, const UserContext& ctx, bool e) {
  const V hb = bipartite(p, ctx, p.bipartite_scorer, p.empty_bipartite);
  const V hs = social(p, cfg, ctx);
  return mlp(e ? p.user_head1 : p.user_head0, cat({hb, hs}));
}

struct Strategy {
  std::vector<V> logits, probs, relaxed;
};

inline Strategy strategy(const ModelParameters& p, const ModelConfig& cfg, const UserContext& ctx, ItemId v, bool e,
                         double tau, const std::vector<V>& noise) {
  const V hd = bipartite(p, ctx, p.strategy_scorer, p.empty_strategy);
  const V flat = mlp(e ? p.strategy_head1 : p.strategy_head0, cat({hd, column(p.item_embeddings, v)}));
  Strategy s;
  for (int b = 0; b < cfg.blocks; ++b) {
    V row(flat.begin() + b * cfg.categories, flat.begin() + (b + 1) * cfg.categories);
    auto softmax = [](const V& x) {
      double mx = x[0];
      for (double a : x) mx = std::max(mx, a);
      double z = 0.0;
      for (double a : x) z += std::exp(a - mx);
      V out;
      for (double a : x) out.push_back(std::exp(a - mx) / z);
      return out;
    };
    V perturbed(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) perturbed[c] = (row[c] + noise[static_cast<std::size_t>(b)][c]) / tau;
    s.logits.push_back(row);
    s.probs.push_back(softmax(row));
    s.relaxed.push_back(softmax(perturbed));
  }
  return s;
}

inline double dot(const V& a, const V& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Non-constant terms of the evidence lower bound, summed per sample and averaged over the batch:
///   E[log P(N|u)] + E[log P(e|u,v,s)] + E[log P(r|u,v,s,e)] - KL(Q(s) || uniform).
/// Explicit ratings use a Gaussian likelihood with variance 1/2, whose log density is -(r - r_hat)^2 up to a constant.
/// Gumbel noise is drawn from `rng` exactly as the model draws it: per sample, block by block.
struct Elbo {
  double log_social = 0.0;
  double log_exposure = 0.0;
  double log_rating = 0.0;
  double kl = 0.0;
  double value() const { return log_social + log_exposure + log_rating - kl; }
};

inline Elbo elbo(const RestModel& model, const Batch& batch, double tau, Rng& rng) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const bool full = cfg.ablation == Ablation::kFull;
  const double n = static_cast<double>(batch.samples.size());
  Elbo out;
  for (const auto& smp : batch.samples) {
    const V hu = user_latent(p, cfg, smp.context, smp.exposed);
    V s_flat(static_cast<std::size_t>(cfg.blocks * cfg.categories), 0.0);
    if (full) {
      std::vector<V> noise(static_cast<std::size_t>(cfg.blocks), V(static_cast<std::size_t>(cfg.categories)));
      for (auto& row : noise)
        for (auto& x : row) x = rng.gumbel();
      const auto st = strategy(p, cfg, smp.context, smp.item, smp.exposed, tau, noise);
      s_flat.clear();
      for (const auto& row : st.relaxed) s_flat.insert(s_flat.end(), row.begin(), row.end());
      for (const auto& q : st.probs)
        for (double x : q) out.kl += x * std::log(x * cfg.categories) / n;
    }
    const V item = column(p.item_embeddings, smp.item);
    const double pe = logistic(mlp(p.exposure_decoder, cat({hu, item, s_flat}))[0]);
    out.log_exposure += (smp.exposed ? std::log(pe) : std::log(1.0 - pe)) / n;

    const double rhat = mlp(smp.exposed ? p.rating_head1 : p.rating_head0, cat({hu, item}))[0];
    if (cfg.feedback_kind == FeedbackKind::kImplicit) {
      const double pr = logistic(rhat);
      out.log_rating += (smp.rating ? std::log(pr) : std::log(1.0 - pr)) / n;
    } else {
      out.log_rating += -(smp.rating - rhat) * (smp.rating - rhat) / n;
    }
    for (const auto& pair : smp.social) {
      const V ho = user_latent(p, cfg, pair.other, true);
      const double pk = logistic(dot(hu, ho));
      out.log_social += (pair.label > 0.5 ? std::log(pk) : std::log(1.0 - pk)) / n;
    }
  }
  return out;
}

/// Sum of squares of every dense tensor plus the embedding columns named in the batch.
inline double regularizer(const RestModel& model, const Batch& batch) {
  std::vector<bool> users(static_cast<std::size_t>(model.config().num_users)),
      items(static_cast<std::size_t>(model.config().num_items));
  auto touch = [&](const UserContext& c) {
    users[static_cast<std::size_t>(c.user)] = true;
    for (auto k : c.neighbors) users[static_cast<std::size_t>(k)] = true;
    for (const auto& ri : c.items) items[static_cast<std::size_t>(ri.item)] = true;
  };
  for (const auto& s : batch.samples) {
    touch(s.context);
    items[static_cast<std::size_t>(s.item)] = true;
    for (const auto& o : s.social) touch(o.other);
  }
  double total = 0.0;
  model.params().visit([&](const std::string& name, const auto& t, bool embedding) {
    if (!embedding) {
      for (Eigen::Index i = 0; i < t.size(); ++i) total += t.data()[i] * t.data()[i];
      return;
    }
    const auto& mask = name == "user_embeddings" ? users : items;
    for (Eigen::Index c = 0; c < t.cols(); ++c)
      if (mask[static_cast<std::size_t>(c)])
        for (Eigen::Index r = 0; r < t.rows(); ++r) total += t(r, c) * t(r, c);
  });
  return total;
}

}  // namespace rest::reference
