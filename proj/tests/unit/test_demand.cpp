#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bikeaccess/demand.hpp"
#include "bikeaccess/error.hpp"
#include "bikeaccess/synthetic.hpp"
#include "support/toy_city.hpp"

using namespace bikeaccess;

TEST_CASE("standardize features") {
  const std::vector<std::vector<double>> rows{{0, 5}, {10, 5}};
  const StandardizedFeatures s = standardize_features(rows);
  CHECK(s.rows[0] == std::vector<double>{-1, 0});
  CHECK(s.rows[1] == std::vector<double>{1, 0});
  CHECK(s.stats.std[1] == 0.0);

  const StandardizedFeatures again = standardize_features(s.rows);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(again.rows[i][j] - s.rows[i][j]) <= 1e-9);
  }
  CHECK_THROWS_AS(standardize_features(std::vector<std::vector<double>>{{1.0}}), InvalidArgument);
  CHECK_THROWS_AS(standardize_features(std::vector<std::vector<double>>{{1.0}, {1.0, 2.0}}), InvalidArgument);
}

TEST_CASE("local graphs") {
  auto st = [](std::string id, double east, double f0) {
    Station s = toy::station(std::move(id), toy::at(east, 0), StationStatus::existing);
    s.static_features[0] = f0;
    return s;
  };
  const Station target = st("m", 100, 5);
  const std::vector<Station> pool{st("a", 0, 0), st("b", 200, 10), st("c", 1000, 5.5)};

  const LocalGraphs g = build_local_graphs(target, std::span(pool).first(2), 2);
  CHECK(g.proximity == std::vector<std::string>{"a", "b"});

  const LocalGraphs all = build_local_graphs(target, pool, 10);
  CHECK(all.proximity.size() == 3);
  CHECK(all.similarity.size() == 3);

  const LocalGraphs one = build_local_graphs(target, pool, 1);
  CHECK(one.proximity == std::vector<std::string>{"a"});  // a and b are equidistant
  CHECK(one.similarity == std::vector<std::string>{"c"});

  const std::vector<Station> twins{st("b", 500, 1), st("a", 600, 1)};
  CHECK(build_local_graphs(target, twins, 1).similarity == std::vector<std::string>{"a"});

  CHECK_THROWS_AS(build_local_graphs(target, std::vector<Station>{}, 1), InvalidArgument);
  CHECK_THROWS_AS(build_local_graphs(target, pool, 0), InvalidArgument);
}

TEST_CASE("temporal features") {
  const auto t = temporal_features(Month{2023, 3}, 2021);
  CHECK(std::abs(t[0] - 1.0) <= 1e-12);
  CHECK(std::abs(t[1]) <= 1e-12);
  CHECK(t[2] == 2.0);
}

TEST_CASE("softmax") {
  const auto p = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(std::abs(p[0] - 0.25) <= 1e-12);
  CHECK(std::abs(p[1] - 0.75) <= 1e-12);
  CHECK(softmax(std::vector<double>{-3.0}) == std::vector<double>{1.0});
  const auto u = softmax(std::vector<double>{2.0, 2.0, 2.0, 2.0});
  for (double x : u) CHECK(std::abs(x - 0.25) <= 1e-15);
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  CHECK(std::isfinite(big[0]));
  CHECK(std::abs(big[0] - 1.0) <= 1e-12);
}

namespace {

ModelDims toy_dims() {
  ModelDims d;
  d.embedding = 2;
  d.monthly = 0;
  d.hidden = 2;
  return d;
}

// Three nodes: target 0, neighbors 1 and 2.
GraphBatch toy_batch() {
  GraphBatch b;
  b.nodes = {Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(0.5, -1.0), Eigen::Vector2d(-0.3, 0.8)};
  GraphBatch::Sample s;
  s.target = 0;
  s.proximity = {1};
  s.similarity = {1, 2};
  s.temporal = {0.5, -0.25, 1.0};
  s.label = 3.0;
  b.samples.push_back(s);
  return b;
}

ModelParams toy_params() {
  ModelParams p = ModelParams::zeros(toy_dims());
  NetworkWeights& w = p.weights;
  w.embed_w << 0.2, -0.1, 0.4, 0.3;
  w.embed_b << 0.05, -0.02;
  w.shared_w << 1.0, 0.5, -0.5, 1.0;
  w.attn_w1 << 0.3, -0.2, 0.1, 0.4, -0.1, 0.2, 0.5, -0.3;
  w.attn_b1 << 0.01, 0.02;
  w.attn_w2 << 0.7, -0.4;
  w.attn_b2 << 0.1;
  for (Eigen::Index i = 0; i < w.head_w1.size(); ++i) w.head_w1.data()[i] = 0.05 * static_cast<double>(i % 7) - 0.1;
  w.head_b1 << 0.2, 0.1;
  w.head_w2 << 1.5, -0.5;
  w.head_b2 << 0.3;
  p.scaling.target_scale = 2.0;
  return p;
}

double relu(double x) { return x > 0 ? x : 0; }

}  // namespace

TEST_CASE("forward pass matches scalar arithmetic") {
  const ModelParams p = toy_params();
  const GraphBatch b = toy_batch();
  const NetworkWeights& w = p.weights;

  double h[3][2], g[3][2];
  for (int n = 0; n < 3; ++n) {
    const double x0 = b.nodes[n](0), x1 = b.nodes[n](1);
    for (int r = 0; r < 2; ++r) h[n][r] = relu(w.embed_w(r, 0) * x0 + w.embed_w(r, 1) * x1 + w.embed_b(r));
    for (int r = 0; r < 2; ++r) g[n][r] = w.shared_w(r, 0) * h[n][0] + w.shared_w(r, 1) * h[n][1];
  }
  auto score = [&](int i, int j) {
    const double in[4] = {g[i][0], g[i][1], g[j][0], g[j][1]};
    double out = w.attn_b2(0);
    for (int r = 0; r < 2; ++r) {
      double a = w.attn_b1(r);
      for (int c = 0; c < 4; ++c) a += w.attn_w1(r, c) * in[c];
      out += w.attn_w2(r) * relu(a);
    }
    return out;
  };
  const double s1 = score(0, 1), s2 = score(0, 2);
  const double e1 = std::exp(s1) / (std::exp(s1) + std::exp(s2));
  const double e2 = 1.0 - e1;

  const double xcat[9] = {1.0, 2.0, 0.5, -0.25, 1.0, h[1][0], h[1][1], e1 * h[1][0] + e2 * h[2][0],
                          e1 * h[1][1] + e2 * h[2][1]};
  double out = w.head_b2(0);
  for (int r = 0; r < 2; ++r) {
    double z = w.head_b1(r);
    for (int c = 0; c < 9; ++c) z += w.head_w1(r, c) * xcat[c];
    out += w.head_w2(r) * relu(z);
  }
  out *= 2.0;

  const std::vector<double> y = forward(p, b);
  REQUIRE(y.size() == 1);
  CHECK(std::abs(y[0] - out) <= 1e-9);

  const std::vector<Eigen::VectorXd> nh{Eigen::Vector2d(h[1][0], h[1][1]), Eigen::Vector2d(h[2][0], h[2][1])};
  const auto att = attention_weights(Eigen::Vector2d(h[0][0], h[0][1]), nh, w);
  CHECK(std::abs(att[0] - e1) <= 1e-12);
  CHECK(std::abs(att[0] + att[1] - 1.0) <= 1e-12);

  CHECK(forward(p, b) == y);
  CHECK(forward(ModelParams::zeros(toy_dims()), b) == std::vector<double>{0.0});
}

TEST_CASE("gradient matches central differences") {
  ModelParams p = toy_params();
  p.weights = NetworkWeights::uniform(toy_dims(), 5);
  // Push pre-activations away from the ReLU kinks.
  p.weights.embed_b.setConstant(0.3);
  p.weights.attn_b1.setConstant(0.3);
  p.weights.head_b1.setConstant(0.3);
  GraphBatch b = toy_batch();
  b.samples.push_back(b.samples[0]);
  b.samples[1].target = 2;
  b.samples[1].proximity = {0, 1};
  b.samples[1].label = -1.0;

  NetworkWeights grad;
  mse_loss(p, b, &grad);
  const Eigen::VectorXd analytic = grad.flatten();
  const Eigen::VectorXd theta = p.weights.flatten();
  const double eps = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += eps;
    p.weights.assign(t);
    const double up = mse_loss(p, b);
    t(i) -= 2 * eps;
    p.weights.assign(t);
    const double down = mse_loss(p, b);
    const double numeric = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(numeric - analytic(i)) / std::max(1e-6, std::abs(numeric) + std::abs(analytic(i))));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("parameters serialize bit-exactly") {
  ModelDims d;
  d.embedding = 4;
  d.hidden = 3;
  ModelParams p;
  p.dims = d;
  p.neighbors = 3;
  p.weights = NetworkWeights::uniform(d, 99);
  p.scaling.target_scale = 1.0 / 3.0;
  p.scaling.base_year = 2022;
  p.scaling.monthly_mean[2] = 0.1;
  const ModelParams q = ModelParams::deserialize(p.serialize());
  CHECK(q.dims == p.dims);
  CHECK(q.neighbors == 3);
  CHECK(q.weights.flatten() == p.weights.flatten());
  CHECK(q.scaling.target_scale == p.scaling.target_scale);
  CHECK(q.scaling.monthly_mean == p.scaling.monthly_mean);
  CHECK(q.scaling.base_year == 2022);
  CHECK(q.serialize() == p.serialize());
  CHECK_THROWS_AS(ModelParams::deserialize("garbage"), ModelError);
}

TEST_CASE("training") {
  const CitySnapshot snap = assemble_snapshot(synthetic::linear_demand_city(12, 2, 3));
  const ModelContext ctx(snap);
  const auto labels = collect_labels(snap);
  REQUIRE(labels.size() == 24);

  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.neighbors = 3;
  cfg.epochs = 0;
  const TrainResult r0 = train(cfg, ctx, labels);
  CHECK(r0.loss_history.size() == 1);
  CHECK(r0.params.weights.flatten() == NetworkWeights::uniform(r0.params.dims, cfg.seed).flatten());

  cfg.epochs = 20;
  const TrainResult a = train(cfg, ctx, labels);
  const TrainResult b = train(cfg, ctx, labels);
  CHECK(a.loss_history.size() == 21);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.params.serialize() == b.params.serialize());
  CHECK(a.loss_history.back() < a.loss_history.front());

  const GraphAttentionPredictor predictor(ctx, a.params);
  const Station cold = toy::station("zz", snap.stations.front().location, StationStatus::cold_start, Month{2023, 1});
  CHECK(predictor.predict(cold, Month{2023, 1}) >= 0.0);

  cfg.learning_rate = -1;
  CHECK_THROWS_AS(train(cfg, ctx, labels), InvalidArgument);
  CHECK_THROWS_AS(train(TrainConfig{}, ctx, std::vector<LabeledSample>{}), ModelError);
}

TEST_CASE("infonce") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> pos{1.0, 0.0};
  const std::vector<double> orth{0.0, 1.0};
  CHECK(std::abs(infonce_intra(a, pos, std::vector<std::vector<double>>{orth}, 1.0) - 0.313262) < 1e-6);
  CHECK(std::abs(infonce_intra(a, orth, std::vector<std::vector<double>>{orth}, 1.0) - std::log(2.0)) <= 1e-12);
  CHECK(infonce_intra(a, pos, std::vector<std::vector<double>>{}, 1.0) == 0.0);
  CHECK_THROWS_AS(infonce_intra(a, pos, std::vector<std::vector<double>>{}, 0.0), InvalidArgument);
}
