#include "rest/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rest/errors.hpp"

namespace rest {
namespace {

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

Vec concat(const Vec& a, const Vec& b, const Vec& c) {
  Vec out(a.size() + b.size() + c.size());
  out << a, b, c;
  return out;
}

void fill_uniform(Mat& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
}

void fill_uniform(Vec& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = (2.0 * rng.uniform() - 1.0) * bound;
}

/// Reshape a flat B*C vector into B rows of C.
Mat to_blocks(const Vec& flat, int blocks, int categories) {
  Mat out(blocks, categories);
  for (int b = 0; b < blocks; ++b)
    for (int c = 0; c < categories; ++c) out(b, c) = flat(b * categories + c);
  return out;
}

Vec from_blocks(const Mat& m) {
  Vec out(m.size());
  for (Eigen::Index b = 0; b < m.rows(); ++b)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(b * m.cols() + c) = m(b, c);
  return out;
}

std::vector<int> argmax_rows(const Mat& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index b = 0; b < m.rows(); ++b) {
    Eigen::Index idx = 0;
    m.row(b).maxCoeff(&idx);
    out[static_cast<std::size_t>(b)] = static_cast<int>(idx);
  }
  return out;
}

}  // namespace

std::string to_string(SocialAggregation v) { return v == SocialAggregation::kNeighbor ? "neighbor" : "self"; }
std::string to_string(Ablation v) { return v == Ablation::kFull ? "full" : "rest-s"; }

SocialAggregation social_aggregation_from_string(const std::string& s) {
  if (s == "neighbor") return SocialAggregation::kNeighbor;
  if (s == "self") return SocialAggregation::kSelf;
  throw ValidationError("social aggregation must be 'neighbor' or 'self', got '" + s + "'");
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "rest-s") return Ablation::kRestS;
  throw ValidationError("ablation must be 'full' or 'rest-s', got '" + s + "'");
}

void ModelConfig::validate() const {
  if (num_users <= 0 || num_items <= 0) throw ValidationError("model needs at least one user and one item");
  if (rating_levels < 1) throw ValidationError("rating_levels must be positive");
  if (dim < 1 || rating_dim < 1 || hidden < 0) throw ValidationError("model dimensions must be positive");
  if (blocks < 1 || categories < 2) throw ValidationError("strategy code needs >= 1 block of >= 2 categories");
}

void ModelConfig::to_kv(KeyValueConfig& kv, const std::string& p) const {
  kv.set_int(p + "num_users", num_users);
  kv.set_int(p + "num_items", num_items);
  kv.set_int(p + "rating_levels", rating_levels);
  kv.set(p + "feedback_kind", rest::to_string(feedback_kind));
  kv.set_int(p + "dim", dim);
  kv.set_int(p + "rating_dim", rating_dim);
  kv.set_int(p + "hidden", hidden);
  kv.set_int(p + "blocks", blocks);
  kv.set_int(p + "categories", categories);
  kv.set(p + "social_agg", rest::to_string(social_aggregation));
  kv.set(p + "ablation", rest::to_string(ablation));
}

ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv, const std::string& p) {
  ModelConfig c;
  c.num_users = static_cast<std::int32_t>(kv.get_int(p + "num_users", 0));
  c.num_items = static_cast<std::int32_t>(kv.get_int(p + "num_items", 0));
  c.rating_levels = static_cast<int>(kv.get_int(p + "rating_levels", 5));
  c.feedback_kind = feedback_kind_from_string(kv.get_string(p + "feedback_kind", "explicit"));
  c.dim = static_cast<int>(kv.get_int(p + "dim", c.dim));
  c.rating_dim = static_cast<int>(kv.get_int(p + "rating_dim", c.rating_dim));
  c.hidden = static_cast<int>(kv.get_int(p + "hidden", c.hidden));
  c.blocks = static_cast<int>(kv.get_int(p + "blocks", c.blocks));
  c.categories = static_cast<int>(kv.get_int(p + "categories", c.categories));
  c.social_aggregation = social_aggregation_from_string(kv.get_string(p + "social_agg", "neighbor"));
  c.ablation = ablation_from_string(kv.get_string(p + "ablation", "full"));
  return c;
}

ModelParameters ModelParameters::zeros(const ModelConfig& cfg) {
  const int d = cfg.dim, m = cfg.message_dim(), h = cfg.hidden_width(), s = cfg.strategy_dim();
  ModelParameters p;
  p.user_embeddings = Mat::Zero(d, cfg.num_users);
  p.item_embeddings = Mat::Zero(d, cfg.num_items);
  p.rating_embeddings = Mat::Zero(cfg.rating_dim, cfg.rating_levels);
  p.bipartite_scorer = nn::Mlp(d + m, h, 1);
  p.strategy_scorer = nn::Mlp(d + m, h, 1);
  p.social_scorer = nn::Mlp(2 * d, h, 1);
  p.empty_bipartite = Vec::Zero(m);
  p.empty_strategy = Vec::Zero(m);
  p.empty_social = Vec::Zero(d);
  p.user_head0 = nn::Mlp(m + d, h, d);
  p.user_head1 = nn::Mlp(m + d, h, d);
  p.strategy_head0 = nn::Mlp(m + d, h, s);
  p.strategy_head1 = nn::Mlp(m + d, h, s);
  p.exposure_decoder = nn::Mlp(2 * d + s, h, 1);
  p.rating_head0 = nn::Mlp(2 * d, h, 1);
  p.rating_head1 = nn::Mlp(2 * d, h, 1);
  return p;
}

ModelParameters ModelParameters::initialize(const ModelConfig& cfg, std::uint64_t seed, double rating_bias) {
  cfg.validate();
  ModelParameters p = zeros(cfg);
  Rng rng(seed);
  const double emb_bound = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  fill_uniform(p.user_embeddings, emb_bound, rng);
  fill_uniform(p.item_embeddings, emb_bound, rng);
  fill_uniform(p.rating_embeddings, 1.0 / std::sqrt(static_cast<double>(cfg.rating_dim)), rng);
  for (auto* mlp : {&p.bipartite_scorer, &p.strategy_scorer, &p.social_scorer, &p.user_head0, &p.user_head1,
                    &p.strategy_head0, &p.strategy_head1, &p.exposure_decoder, &p.rating_head0, &p.rating_head1})
    mlp->init(rng);
  fill_uniform(p.empty_bipartite, emb_bound, rng);
  fill_uniform(p.empty_strategy, emb_bound, rng);
  fill_uniform(p.empty_social, emb_bound, rng);
  p.rating_head0.b2(0) = rating_bias;
  p.rating_head1.b2(0) = rating_bias;
  return p;
}

void ModelParameters::set_zero() {
  visit([](const std::string&, auto& t, bool) { t.setZero(); });
}

bool ModelParameters::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const auto& t, bool) { ok = ok && t.allFinite(); });
  return ok;
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const auto& t, bool) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

Vec StrategyCode::flat() const { return from_blocks(relaxed); }

RestModel::RestModel(ModelConfig config, std::uint64_t seed, double rating_bias)
    : config_(config), params_(ModelParameters::initialize(config, seed, rating_bias)) {}

RestModel::RestModel(ModelConfig config, ModelParameters params) : config_(config), params_(std::move(params)) {
  config_.validate();
  const auto expected = ModelParameters::zeros(config_);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  expected.visit([&](const std::string&, const auto& t, bool) { shapes.emplace_back(t.rows(), t.cols()); });
  std::size_t i = 0;
  params_.visit([&](const std::string& name, const auto& t, bool) {
    if (shapes[i++] != std::make_pair(t.rows(), t.cols()))
      throw ValidationError("parameter '" + name + "' does not match the model config");
  });
}

void RestModel::check_user(UserId u) const {
  if (u < 0 || u >= config_.num_users) throw ValidationError("unknown user id " + std::to_string(u));
}

void RestModel::check_item(ItemId v) const {
  if (v < 0 || v >= config_.num_items) throw ValidationError("unknown item id " + std::to_string(v));
}

Mat RestModel::bipartite_messages(std::span<const RatedItem> items) const {
  const int d = config_.dim;
  Mat msgs(config_.message_dim(), static_cast<Eigen::Index>(items.size()));
  for (std::size_t j = 0; j < items.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    msgs.col(col).head(d) = params_.item_embeddings.col(items[j].item);
    msgs.col(col).tail(config_.rating_dim) = params_.rating_embeddings.col(items[j].rating - 1);
  }
  return msgs;
}

Aggregate RestModel::aggregate_bipartite(UserId u, std::span<const RatedItem> items) const {
  check_user(u);
  if (items.empty()) return {params_.empty_bipartite, {}};
  nn::AttentionCache cache;
  const Mat msgs = bipartite_messages(items);
  Vec h = nn::attention_forward(params_.bipartite_scorer, params_.user_embeddings.col(u), msgs, msgs, &cache);
  return {std::move(h), std::move(cache.weights)};
}

Aggregate RestModel::aggregate_strategy_context(UserId u, std::span<const RatedItem> items) const {
  check_user(u);
  if (items.empty()) return {params_.empty_strategy, {}};
  nn::AttentionCache cache;
  const Mat msgs = bipartite_messages(items);
  Vec h = nn::attention_forward(params_.strategy_scorer, params_.user_embeddings.col(u), msgs, msgs, &cache);
  return {std::move(h), std::move(cache.weights)};
}

Aggregate RestModel::aggregate_social(UserId u, std::span<const UserId> neighbors) const {
  check_user(u);
  if (neighbors.empty()) return {params_.empty_social, {}};
  Mat keys(config_.dim, static_cast<Eigen::Index>(neighbors.size()));
  for (std::size_t j = 0; j < neighbors.size(); ++j)
    keys.col(static_cast<Eigen::Index>(j)) = params_.user_embeddings.col(neighbors[j]);
  Mat values = keys;
  if (config_.social_aggregation == SocialAggregation::kSelf) values.colwise() = params_.user_embeddings.col(u);
  nn::AttentionCache cache;
  Vec h = nn::attention_forward(params_.social_scorer, params_.user_embeddings.col(u), keys, values, &cache);
  return {std::move(h), std::move(cache.weights)};
}

Vec RestModel::encode_user(const Vec& h_bipartite, const Vec& h_social, bool exposed) const {
  const auto& head = exposed ? params_.user_head1 : params_.user_head0;
  return nn::forward(head, concat(h_bipartite, h_social));
}

Vec RestModel::user_latent(const UserContext& ctx, bool exposed) const {
  return encode_user(aggregate_bipartite(ctx.user, ctx.items).h, aggregate_social(ctx.user, ctx.neighbors).h,
                     exposed);
}

StrategyCode RestModel::encode_strategy(const Vec& h_strategy, ItemId v, bool exposed, double tau,
                                        const Mat& noise) const {
  if (!(tau > 0.0)) throw ValidationError("Gumbel-Softmax temperature must be positive");
  check_item(v);
  const auto& head = exposed ? params_.strategy_head1 : params_.strategy_head0;
  StrategyCode code;
  code.logits = to_blocks(nn::forward(head, concat(h_strategy, params_.item_embeddings.col(v))), config_.blocks,
                          config_.categories);
  code.probabilities = nn::softmax_rows(code.logits);
  code.relaxed = nn::softmax_rows((code.logits + noise) / tau);
  code.hard_code = argmax_rows(code.relaxed);
  return code;
}

StrategyCode RestModel::encode_strategy(const Vec& h_strategy, ItemId v, bool exposed, double tau, Rng& rng) const {
  Mat noise(config_.blocks, config_.categories);
  for (int b = 0; b < config_.blocks; ++b)
    for (int c = 0; c < config_.categories; ++c) noise(b, c) = rng.gumbel();
  return encode_strategy(h_strategy, v, exposed, tau, noise);
}

double RestModel::reconstruct_social_edge(const Vec& h_u, const Vec& h_other) {
  return nn::sigmoid(h_u.dot(h_other));
}

double RestModel::reconstruct_exposure(const Vec& h_u, ItemId v, const Vec& strategy_flat) const {
  check_item(v);
  return nn::sigmoid(nn::forward(params_.exposure_decoder, concat(h_u, params_.item_embeddings.col(v), strategy_flat))(0));
}

double RestModel::predict_rating(const Vec& h_u, ItemId v, bool exposed) const {
  check_item(v);
  const auto& head = exposed ? params_.rating_head1 : params_.rating_head0;
  const double out = nn::forward(head, concat(h_u, params_.item_embeddings.col(v)))(0);
  return config_.feedback_kind == FeedbackKind::kImplicit ? nn::sigmoid(out) : out;
}

UserContext RestModel::full_context(const GraphStore& graph, UserId u, ItemId exclude) {
  UserContext ctx;
  ctx.user = u;
  for (const auto& ri : graph.items_of(u))
    if (ri.item != exclude) ctx.items.push_back(ri);
  auto nb = graph.neighbors_of(u);
  ctx.neighbors.assign(nb.begin(), nb.end());
  return ctx;
}

double RestModel::score_for_eval(const GraphStore& graph, UserId u, ItemId v) const {
  check_user(u);
  check_item(v);
  const Vec h = user_latent(full_context(graph, u, v), true);
  return nn::forward(params_.rating_head1, concat(h, params_.item_embeddings.col(v)))(0);
}

std::vector<double> RestModel::score_candidates(const GraphStore& graph, UserId u,
                                                std::span<const ItemId> items) const {
  check_user(u);
  const Vec shared = user_latent(full_context(graph, u, -1), true);
  std::vector<double> scores;
  scores.reserve(items.size());
  for (ItemId v : items) {
    check_item(v);
    if (graph.exposed(u, v)) {
      scores.push_back(score_for_eval(graph, u, v));
    } else {
      scores.push_back(nn::forward(params_.rating_head1, concat(shared, params_.item_embeddings.col(v)))(0));
    }
  }
  return scores;
}

double RestModel::predict_for_eval(const GraphStore& graph, UserId u, ItemId v) const {
  const double out = score_for_eval(graph, u, v);
  if (config_.feedback_kind == FeedbackKind::kImplicit) return nn::sigmoid(out);
  return std::clamp(out, 1.0, static_cast<double>(config_.rating_levels));
}

std::vector<int> RestModel::strategy_code_for_eval(const GraphStore& graph, UserId u, ItemId v) const {
  if (config_.ablation == Ablation::kRestS) throw ValidationError("a rest-s model has no strategy encoder");
  check_user(u);
  const auto ctx = full_context(graph, u, v);
  const Vec hd = aggregate_strategy_context(u, ctx.items).h;
  return encode_strategy(hd, v, true, 1.0, Mat::Zero(config_.blocks, config_.categories)).hard_code;
}

// ---------------------------------------------------------------------------
// Training forward/backward.

namespace {

struct UserTrace {
  bool bipartite_empty = true;
  bool social_empty = true;
  nn::AttentionCache bipartite;
  nn::AttentionCache social;
  Vec hb, hs;
  nn::MlpCache head;
  Vec h;
  bool exposed = true;
};

struct StrategyTrace {
  bool context_empty = true;
  nn::AttentionCache context;
  Vec hd;
  nn::MlpCache head;
  Mat logits, probabilities, relaxed;
};


struct Engine {
  const ModelConfig& cfg;
  const ModelParameters& p;

  Mat messages(std::span<const RatedItem> items) const {
    const int d = cfg.dim;
    Mat msgs(cfg.message_dim(), static_cast<Eigen::Index>(items.size()));
    for (std::size_t j = 0; j < items.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      msgs.col(col).head(d) = p.item_embeddings.col(items[j].item);
      msgs.col(col).tail(cfg.rating_dim) = p.rating_embeddings.col(items[j].rating - 1);
    }
    return msgs;
  }

  void scatter_messages(std::span<const RatedItem> items, const Mat& dmsgs, ModelParameters& g) const {
    const int d = cfg.dim;
    for (std::size_t j = 0; j < items.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      g.item_embeddings.col(items[j].item) += dmsgs.col(col).head(d);
      g.rating_embeddings.col(items[j].rating - 1) += dmsgs.col(col).tail(cfg.rating_dim);
    }
  }

  UserTrace encode(const UserContext& ctx, bool exposed) const {
    UserTrace t;
    t.exposed = exposed;
    const Vec query = p.user_embeddings.col(ctx.user);
    t.bipartite_empty = ctx.items.empty();
    if (t.bipartite_empty) {
      t.hb = p.empty_bipartite;
    } else {
      const Mat msgs = messages(ctx.items);
      t.hb = nn::attention_forward(p.bipartite_scorer, query, msgs, msgs, &t.bipartite);
    }
    t.social_empty = ctx.neighbors.empty();
    if (t.social_empty) {
      t.hs = p.empty_social;
    } else {
      Mat keys(cfg.dim, static_cast<Eigen::Index>(ctx.neighbors.size()));
      for (std::size_t j = 0; j < ctx.neighbors.size(); ++j)
        keys.col(static_cast<Eigen::Index>(j)) = p.user_embeddings.col(ctx.neighbors[j]);
      Mat values = keys;
      if (cfg.social_aggregation == SocialAggregation::kSelf) values.colwise() = query;
      t.hs = nn::attention_forward(p.social_scorer, query, keys, values, &t.social);
    }
    t.h = nn::forward(exposed ? p.user_head1 : p.user_head0, concat(t.hb, t.hs), &t.head);
    return t;
  }

  void encode_backward(const UserContext& ctx, const UserTrace& t, const Vec& dh, ModelParameters& g) const {
    const auto m = cfg.message_dim();
    const Vec dx = nn::backward(t.exposed ? p.user_head1 : p.user_head0, t.head, dh,
                                t.exposed ? g.user_head1 : g.user_head0);
    const Vec dhb = dx.head(m);
    const Vec dhs = dx.tail(cfg.dim);
    if (t.bipartite_empty) {
      g.empty_bipartite += dhb;
    } else {
      auto ag = nn::attention_backward(p.bipartite_scorer, t.bipartite, dhb, g.bipartite_scorer);
      g.user_embeddings.col(ctx.user) += ag.query;
      scatter_messages(ctx.items, ag.keys + ag.values, g);
    }
    if (t.social_empty) {
      g.empty_social += dhs;
    } else {
      auto ag = nn::attention_backward(p.social_scorer, t.social, dhs, g.social_scorer);
      g.user_embeddings.col(ctx.user) += ag.query;
      for (std::size_t j = 0; j < ctx.neighbors.size(); ++j)
        g.user_embeddings.col(ctx.neighbors[j]) += ag.keys.col(static_cast<Eigen::Index>(j));
      if (cfg.social_aggregation == SocialAggregation::kSelf) {
        g.user_embeddings.col(ctx.user) += ag.values.rowwise().sum();
      } else {
        for (std::size_t j = 0; j < ctx.neighbors.size(); ++j)
          g.user_embeddings.col(ctx.neighbors[j]) += ag.values.col(static_cast<Eigen::Index>(j));
      }
    }
  }

  StrategyTrace strategy(const UserContext& ctx, ItemId v, bool exposed, double tau, const Mat& noise) const {
    StrategyTrace t;
    t.context_empty = ctx.items.empty();
    if (t.context_empty) {
      t.hd = p.empty_strategy;
    } else {
      const Mat msgs = messages(ctx.items);
      t.hd = nn::attention_forward(p.strategy_scorer, p.user_embeddings.col(ctx.user), msgs, msgs, &t.context);
    }
    const Vec flat = nn::forward(exposed ? p.strategy_head1 : p.strategy_head0,
                                 concat(t.hd, p.item_embeddings.col(v)), &t.head);
    t.logits = to_blocks(flat, cfg.blocks, cfg.categories);
    t.probabilities = nn::softmax_rows(t.logits);
    t.relaxed = nn::softmax_rows((t.logits + noise) / tau);
    return t;
  }

  void strategy_backward(const UserContext& ctx, ItemId v, bool exposed, double tau, const StrategyTrace& t,
                         const Mat& drelaxed, double kl_scale, ModelParameters& g) const {
    Mat dlogits(cfg.blocks, cfg.categories);
    for (int b = 0; b < cfg.blocks; ++b) {
      const auto y = t.relaxed.row(b);
      const double inner = y.dot(drelaxed.row(b));
      dlogits.row(b) = (y.array() * (drelaxed.row(b).array() - inner) / tau).matrix();
      const auto q = t.probabilities.row(b);
      const double neg_entropy = (q.array() * q.array().log()).sum();
      dlogits.row(b) += kl_scale * (q.array() * (q.array().log() - neg_entropy)).matrix();
    }
    const Vec dx = nn::backward(exposed ? p.strategy_head1 : p.strategy_head0, t.head, from_blocks(dlogits),
                                exposed ? g.strategy_head1 : g.strategy_head0);
    const auto m = cfg.message_dim();
    g.item_embeddings.col(v) += dx.tail(cfg.dim);
    const Vec dhd = dx.head(m);
    if (t.context_empty) {
      g.empty_strategy += dhd;
    } else {
      auto ag = nn::attention_backward(p.strategy_scorer, t.context, dhd, g.strategy_scorer);
      g.user_embeddings.col(ctx.user) += ag.query;
      scatter_messages(ctx.items, ag.keys + ag.values, g);
    }
  }
};

}  // namespace

double RestModel::regularizer(const Batch& batch, ModelParameters* grad, double scale) const {
  std::unordered_set<UserId> users;
  std::unordered_set<ItemId> items;
  auto touch = [&](const UserContext& ctx) {
    users.insert(ctx.user);
    for (auto k : ctx.neighbors) users.insert(k);
    for (const auto& ri : ctx.items) items.insert(ri.item);
  };
  for (const auto& s : batch.samples) {
    touch(s.context);
    items.insert(s.item);
    for (const auto& pair : s.social) touch(pair.other);
  }
  // Sorted so the floating-point sum does not depend on hash order.
  std::vector<UserId> user_list(users.begin(), users.end());
  std::vector<ItemId> item_list(items.begin(), items.end());
  std::sort(user_list.begin(), user_list.end());
  std::sort(item_list.begin(), item_list.end());

  double total = 0.0;
  for (auto u : user_list) {
    total += params_.user_embeddings.col(u).squaredNorm();
    if (grad) grad->user_embeddings.col(u) += 2.0 * scale * params_.user_embeddings.col(u);
  }
  for (auto v : item_list) {
    total += params_.item_embeddings.col(v).squaredNorm();
    if (grad) grad->item_embeddings.col(v) += 2.0 * scale * params_.item_embeddings.col(v);
  }
  std::vector<std::pair<const double*, Eigen::Index>> dense;
  params_.visit([&](const std::string&, const auto& t, bool embedding) {
    if (embedding) return;
    total += t.squaredNorm();
    dense.emplace_back(t.data(), t.size());
  });
  if (grad) {
    std::size_t i = 0;
    grad->visit([&](const std::string&, auto& t, bool embedding) {
      if (embedding) return;
      const auto [src, n] = dense[i++];
      Eigen::Map<Eigen::VectorXd>(t.data(), n) += 2.0 * scale * Eigen::Map<const Eigen::VectorXd>(src, n);
    });
  }
  return total;
}

LossTerms RestModel::loss_terms(const Batch& batch, double tau, double gamma, Rng& rng, ModelParameters* grad) const {
  if (batch.samples.empty()) throw ValidationError("empty batch");
  if (!(tau > 0.0)) throw ValidationError("Gumbel-Softmax temperature must be positive");
  if (gamma < 0.0) throw ValidationError("gamma must be non-negative");

  const Engine eng{config_, params_};
  const bool with_strategy = config_.ablation == Ablation::kFull;
  const bool implicit = config_.feedback_kind == FeedbackKind::kImplicit;
  const double inv_n = 1.0 / static_cast<double>(batch.samples.size());
  const double log_c = std::log(static_cast<double>(config_.categories));
  const int s_dim = config_.strategy_dim();

  LossTerms terms;
  terms.gamma = gamma;
  Mat noise(config_.blocks, config_.categories);

  for (const auto& sample : batch.samples) {
    check_item(sample.item);
    const bool e = sample.exposed;
    UserTrace user = eng.encode(sample.context, e);

    StrategyTrace strat;
    Vec s_flat = Vec::Zero(s_dim);
    if (with_strategy) {
      for (int b = 0; b < config_.blocks; ++b)
        for (int c = 0; c < config_.categories; ++c) noise(b, c) = rng.gumbel();
      strat = eng.strategy(sample.context, sample.item, e, tau, noise);
      s_flat = from_blocks(strat.relaxed);
      double kl = 0.0;
      for (int b = 0; b < config_.blocks; ++b)
        kl += (strat.probabilities.row(b).array() * strat.probabilities.row(b).array().log()).sum() + log_c;
      terms.kl_strategy += inv_n * kl;
    }

    const Vec item = params_.item_embeddings.col(sample.item);

    nn::MlpCache exposure_cache;
    const double exposure_logit =
        nn::forward(params_.exposure_decoder, concat(user.h, item, s_flat), &exposure_cache)(0);
    const double e_target = e ? 1.0 : 0.0;
    terms.nll_exposure += inv_n * nn::bce_with_logit(exposure_logit, e_target);

    const auto& rating_head = e ? params_.rating_head1 : params_.rating_head0;
    nn::MlpCache rating_cache;
    const double rating_out = nn::forward(rating_head, concat(user.h, item), &rating_cache)(0);
    const double r = static_cast<double>(sample.rating);
    double drating;
    if (implicit) {
      terms.nll_rating += inv_n * nn::bce_with_logit(rating_out, r);
      drating = nn::sigmoid(rating_out) - r;
    } else {
      const double resid = rating_out - r;
      terms.nll_rating += inv_n * resid * resid;
      drating = 2.0 * resid;
    }

    std::vector<UserTrace> others;
    others.reserve(sample.social.size());
    std::vector<double> dsocial;
    for (const auto& pair : sample.social) {
      others.push_back(eng.encode(pair.other, true));
      const double logit = user.h.dot(others.back().h);
      terms.nll_social += inv_n * nn::bce_with_logit(logit, pair.label);
      dsocial.push_back(nn::sigmoid(logit) - pair.label);
    }

    if (!grad) continue;
    ModelParameters& g = *grad;
    const auto d = config_.dim;

    Vec dh = Vec::Zero(d);
    Vec dx_r = nn::backward(rating_head, rating_cache, Vec::Constant(1, inv_n * drating),
                            e ? g.rating_head1 : g.rating_head0);
    dh += dx_r.head(d);
    g.item_embeddings.col(sample.item) += dx_r.tail(d);

    const double dexp = inv_n * (nn::sigmoid(exposure_logit) - e_target);
    Vec dx_e = nn::backward(params_.exposure_decoder, exposure_cache, Vec::Constant(1, dexp), g.exposure_decoder);
    dh += dx_e.head(d);
    g.item_embeddings.col(sample.item) += dx_e.segment(d, d);

    for (std::size_t k = 0; k < sample.social.size(); ++k) {
      const double dl = inv_n * dsocial[k];
      dh += dl * others[k].h;
      eng.encode_backward(sample.social[k].other, others[k], dl * user.h, g);
    }

    if (with_strategy) {
      const Mat ds = to_blocks(dx_e.tail(s_dim), config_.blocks, config_.categories);
      eng.strategy_backward(sample.context, sample.item, e, tau, strat, ds, inv_n, g);
    }
    eng.encode_backward(sample.context, user, dh, g);
  }

  terms.regularizer = regularizer(batch, gamma > 0.0 ? grad : nullptr, gamma);
  return terms;
}

}  // namespace rest
