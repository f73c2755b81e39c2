// Acceptance suite: one PASS/FAIL line per criterion. argv[1] is the CLI binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "bikeaccess/accessibility.hpp"
#include "bikeaccess/demand.hpp"
#include "bikeaccess/engine.hpp"
#include "bikeaccess/equity.hpp"
#include "bikeaccess/placement.hpp"
#include "bikeaccess/routing.hpp"
#include "bikeaccess/synthetic.hpp"
#include "support/toy_city.hpp"

using namespace bikeaccess;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kEdfTol = 1e-12;
constexpr double kPtalTol = 1e-12;
constexpr double kGiniTol = 1e-12;
constexpr double kRouteTol = 1e-9;
constexpr double kRouteBudgetS = 5.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradFloor = 1e-6;  // denominator floor for near-zero gradients
constexpr double kFdEps = 1e-5;
constexpr double kMseReduction = 0.5;
constexpr int kTrainEpochs = 200;
constexpr double kAttentionTol = 1e-9;
constexpr double kSpacingM = 305.0;
constexpr double kCurveBudgetS = 30.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("threw: {}", e.what())};
  }
  if (!o.pass) ++failures;
  fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome edf_exactness() {
  const double a = edf(5, 12);
  const double b = edf(0, 240);
  const double c = edf(3.7, 0);
  const bool ok = std::abs(a - 30.0 / 10.75) <= kEdfTol && std::abs(b - 30.0) <= kEdfTol && c == 0.0;
  return {ok, fmt::format("edf(5,12)={:.15f} edf(0,240)={:.15f} edf(3.7,0)={}", a, b, c)};
}

Outcome ptal_exactness() {
  const double p = ptal(std::vector<double>{3, 2, 1});
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> value(0.0, 40.0);
  std::uniform_int_distribution<int> len(0, 12);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> edfs(static_cast<std::size_t>(len(rng)));
    for (double& e : edfs) e = value(rng);
    const double before = ptal(edfs);
    edfs.push_back(value(rng));
    std::shuffle(edfs.begin(), edfs.end(), rng);
    if (ptal(edfs) < before) ++violations;
  }
  return {std::abs(p - 4.5) <= kPtalTol && violations == 0,
          fmt::format("ptal([3,2,1])={:.15f}; monotonicity violations 0/1000 expected, got {}", p, violations)};
}

double brute_gini(const std::vector<GroupStats>& g) {
  double w = 0.0, wm = 0.0, num = 0.0;
  for (const auto& a : g) {
    w += a.w;
    wm += a.w * a.m;
    for (const auto& b : g) num += a.w * b.w * std::abs(a.m - b.m);
  }
  const double mu = wm / w;
  return num / (2.0 * w * w * mu);
}

Outcome gini_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> groups(1, 12);
  std::uniform_real_distribution<double> weight(0.0, 30.0);
  std::uniform_real_distribution<double> mean(0.0, 5000.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  double worst = 0.0, worst_scale = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<GroupStats> g(static_cast<std::size_t>(groups(rng)));
    for (auto& s : g) s = {"g", std::floor(weight(rng)) + 1.0, mean(rng)};
    const double fast = *gini(g);
    worst = std::max(worst, std::abs(fast - brute_gini(g)));
    const double k = scale(rng);
    std::vector<GroupStats> scaled = g;
    for (auto& s : scaled) s.m *= k;
    worst_scale = std::max(worst_scale, std::abs(*gini(scaled) - fast));
  }
  const double two = *gini(std::vector<GroupStats>{{"a", 1, 0}, {"b", 1, 10}});
  return {worst <= kGiniTol && worst_scale <= kGiniTol && two == 0.5,
          fmt::format("max |fast-brute|={:.3g} over 1000 sets; two-group={}; max scale drift={:.3g}", worst, two,
                      worst_scale)};
}

Outcome routing_oracle() {
  std::mt19937_64 rng(555);
  const auto t0 = Clock::now();
  double worst = 0.0;
  int queries = 0;
  for (int g = 0; g < 20; ++g) {
    std::uniform_int_distribution<int> size(2, 50);
    const int n = size(rng);
    std::uniform_real_distribution<double> coord(0.0, 3000.0);
    std::uniform_real_distribution<double> stretch(1.0, 1.6);
    std::vector<GeoPoint> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back(toy::at(coord(rng), coord(rng)));
    std::vector<RoadEdge> edges;
    auto add = [&](int u, int v) {
      const double len = std::max(1.0, haversine_m(nodes[u], nodes[v]) * stretch(rng));
      edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), len, RoadClass::residential, false});
    };
    for (int i = 1; i < n; ++i) add(std::uniform_int_distribution<int>(0, i - 1)(rng), i);  // spanning tree
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < 2 * n; ++k) add(pick(rng), pick(rng));
    const RoadNetwork net(nodes, edges);

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (int i = 0; i < n; ++i) d[i][i] = 0.0;
    for (const RoadEdge& e : edges) {
      d[e.u][e.v] = std::min(d[e.u][e.v], e.length_m);
      d[e.v][e.u] = std::min(d[e.v][e.u], e.length_m);
    }
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);

    for (int q = 0; q < 100; ++q) {
      const int s = pick(rng), t = pick(rng);
      const double got = shortest_path_m(net, static_cast<NodeId>(s), static_cast<NodeId>(t), TravelMode::bike).distance_m;
      worst = std::max(worst, std::abs(got - d[s][t]));
      ++queries;
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst <= kRouteTol && elapsed < kRouteBudgetS,
          fmt::format("{} queries on 20 graphs, max error {:.3g} m, {:.3f} s", queries, worst, elapsed)};
}

// D=2 region embedding, H=2 hidden units, default monthly width.
Outcome gradient_check() {
  ModelDims dims;
  dims.embedding = 2;
  dims.hidden = 2;
  ModelParams p;
  p.dims = dims;
  p.weights = NetworkWeights::uniform(dims, 31);
  for (Eigen::Index i = 0; i < p.weights.embed_w.size(); ++i) p.weights.embed_w.data()[i] *= 5.0;
  p.weights.embed_b.setConstant(0.2);
  p.weights.attn_w1 *= 5.0;
  p.weights.attn_b1.setConstant(0.2);
  p.weights.head_w1 *= 5.0;
  p.weights.head_b1.setConstant(0.2);

  std::mt19937_64 rng(32);
  std::normal_distribution<double> x(0.0, 1.0);
  GraphBatch b;
  for (int i = 0; i < 7; ++i) {
    Eigen::VectorXd v(dims.node_input());
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = x(rng);
    b.nodes.push_back(v);
  }
  for (int s = 0; s < 4; ++s) {
    GraphBatch::Sample smp;
    smp.target = s;
    smp.proximity = {(s + 1) % 7, (s + 2) % 7, (s + 4) % 7};
    smp.similarity = {(s + 3) % 7, (s + 5) % 7};
    smp.temporal = {x(rng), x(rng), 1.0};
    smp.label = x(rng);
    b.samples.push_back(smp);
  }

  NetworkWeights grad;
  mse_loss(p, b, &grad);
  const Eigen::VectorXd analytic = grad.flatten();
  const Eigen::VectorXd theta = p.weights.flatten();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) = theta(i) + kFdEps;
    p.weights.assign(t);
    const double up = mse_loss(p, b);
    t(i) = theta(i) - kFdEps;
    p.weights.assign(t);
    const double down = mse_loss(p, b);
    const double numeric = (up - down) / (2.0 * kFdEps);
    const double denom = std::max({std::abs(numeric), std::abs(analytic(i)), kGradFloor});
    worst = std::max(worst, std::abs(numeric - analytic(i)) / denom);
  }
  return {worst < kGradTol, fmt::format("{} parameters, max relative error {:.3g}", theta.size(), worst)};
}

Outcome training_reduces_mse() {
  const auto t0 = Clock::now();
  const CitySnapshot snap = assemble_snapshot(synthetic::linear_demand_city(60, 12));
  const ModelContext ctx(snap);
  const auto labels = collect_labels(snap);
  TrainConfig cfg;
  cfg.epochs = kTrainEpochs;
  const TrainResult r = train(cfg, ctx, labels);
  const double first = r.loss_history.front();
  const double last = r.loss_history.back();
  return {last <= kMseReduction * first,
          fmt::format("{} labels, MSE {:.4g} -> {:.4g} ({:.1f}% reduction) in {} epochs, {:.2f} s", labels.size(),
                      first, last, 100.0 * (1.0 - last / first), kTrainEpochs, seconds_since(t0))};
}

Outcome attention_properties() {
  std::mt19937_64 rng(64);
  std::normal_distribution<double> x(0.0, 1.0);
  ModelDims dims;
  dims.embedding = 4;
  dims.hidden = 6;
  double worst_sum = 0.0, worst_perm = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    NetworkWeights w = NetworkWeights::uniform(dims, 1000 + trial);
    w.attn_w1 *= 10.0;
    w.attn_w2 *= 10.0;
    auto vec = [&] {
      Eigen::VectorXd v(dims.hidden);
      for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::abs(x(rng));
      return v;
    };
    const Eigen::VectorXd target = vec();
    std::vector<Eigen::VectorXd> nb(1 + trial % 8);
    for (auto& v : nb) v = vec();
    const auto a = attention_weights(target, nb, w);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(a.begin(), a.end(), 0.0) - 1.0));

    std::vector<std::size_t> perm(nb.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Eigen::VectorXd> shuffled;
    for (std::size_t i : perm) shuffled.push_back(nb[i]);
    const auto b = attention_weights(target, shuffled, w);
    Eigen::VectorXd agg_a = Eigen::VectorXd::Zero(dims.hidden), agg_b = agg_a;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      worst_perm = std::max(worst_perm, std::abs(b[i] - a[perm[i]]));
      agg_a += a[i] * nb[i];
      agg_b += b[i] * shuffled[i];
    }
    worst_perm = std::max(worst_perm, (agg_a - agg_b).cwiseAbs().maxCoeff());
  }
  return {worst_sum <= kAttentionTol && worst_perm <= kAttentionTol,
          fmt::format("200 trials, max |sum-1|={:.3g}, max permutation drift={:.3g}", worst_sum, worst_perm)};
}

Outcome demand_model() {
  const Outcome g = gradient_check();
  const Outcome t = training_reduces_mse();
  const Outcome a = attention_properties();
  return {g.pass && t.pass && a.pass,
          fmt::format("gradient: {} [{}]; training: {} [{}]; attention: {} [{}]", g.detail, g.pass ? "ok" : "bad",
                      t.detail, t.pass ? "ok" : "bad", a.detail, a.pass ? "ok" : "bad")};
}

// ---------------------------------------------------------------------------

// Lexicographically best feasible subset in ranking order, by enumeration.
std::vector<std::string> exhaustive_best(const std::vector<ScoredCandidate>& cands, int n) {
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cands[a].score.wptal != cands[b].score.wptal) return cands[a].score.wptal > cands[b].score.wptal;
    return cands[a].candidate_id < cands[b].candidate_id;
  });
  const std::size_t m = cands.size();
  std::vector<bool> best;
  bool have = false;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<bool> pick(m);
    std::vector<std::size_t> chosen;
    for (std::size_t r = 0; r < m; ++r) {
      if (mask & (1u << r)) {
        pick[r] = true;
        chosen.push_back(order[r]);
      }
    }
    if (static_cast<int>(chosen.size()) > n) continue;
    bool feasible = true;
    for (std::size_t i = 0; i < chosen.size() && feasible; ++i) {
      for (std::size_t j = i + 1; j < chosen.size(); ++j) {
        if (haversine_m(cands[chosen[i]].score.location, cands[chosen[j]].score.location) < kSpacingM) {
          feasible = false;
          break;
        }
      }
    }
    if (!feasible) continue;
    if (!have || std::lexicographical_compare(best.begin(), best.end(), pick.begin(), pick.end())) {
      best = pick;
      have = true;
    }
  }
  std::vector<std::string> out;
  for (std::size_t r = 0; r < m; ++r) {
    if (best[r]) out.push_back(cands[order[r]].candidate_id);
  }
  return out;
}

Outcome placement(const Engine& engine, const Month& month) {
  const CitySnapshot& snap = engine.snapshot();
  const int available = static_cast<int>(engine.candidates(month).scored.size());
  double min_pair = std::numeric_limits<double>::infinity();
  double min_station = std::numeric_limits<double>::infinity();
  int selections = 0;
  for (int n : {1, 5, 10, available}) {
    const auto picks = engine.recommend(month, n);
    selections += static_cast<int>(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) {
      for (std::size_t j = i + 1; j < picks.size(); ++j) {
        min_pair = std::min(min_pair, haversine_m(picks[i].score.location, picks[j].score.location));
      }
      for (const Station& s : snap.stations) {
        if (s.status == StationStatus::candidate) continue;
        min_station = std::min(min_station, haversine_m(picks[i].score.location, s.location));
      }
    }
  }
  const bool spacing_ok = selections > 0 && min_pair >= kSpacingM && min_station >= kSpacingM;

  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(1, 10);
  std::uniform_real_distribution<double> coord(0.0, 1200.0);
  std::uniform_int_distribution<int> score(0, 6);  // coarse scores force ties
  const PlacementParams params;
  int mismatches = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int m = count(rng);
    std::vector<ScoredCandidate> cands;
    for (int k = 0; k < m; ++k) {
      ScoredCandidate c;
      c.candidate_id = fmt::format("c{:02d}", (k * 7) % 10 + 10 * (k / 10));
      c.score.station_id = c.candidate_id;
      c.score.location = toy::at(coord(rng), coord(rng));
      c.score.wptal = score(rng);
      cands.push_back(c);
    }
    const int n = std::uniform_int_distribution<int>(0, m)(rng);
    std::vector<std::string> greedy;
    for (const auto& c : recommend(cands, n, params)) greedy.push_back(c.candidate_id);
    std::vector<std::string> oracle = exhaustive_best(cands, n);
    // Compare as ordered selections: greedy order is rank order.
    if (greedy != oracle) ++mismatches;
  }
  return {spacing_ok && mismatches == 0,
          fmt::format("{} selections, min pair {:.1f} m, min to station {:.1f} m; greedy vs enumeration mismatches "
                      "{}/50",
                      selections, min_pair, min_station, mismatches)};
}

Outcome equity_curve_scenario(double* setup_s, std::unique_ptr<Engine>* engine_out, Month* month_out) {
  const auto t0 = Clock::now();
  CitySnapshot snap = assemble_snapshot(synthetic::equity_grid_city());
  std::optional<ModelParams> model;
  {
    const ModelContext ctx(snap);
    model = train(TrainConfig{}, ctx, collect_labels(snap)).params;
  }
  auto engine = std::make_unique<Engine>(std::move(snap), std::nullopt, std::move(model));
  const Month month = synthetic::grid_month();
  const auto& cands = engine->candidates(month);
  const int available = static_cast<int>(cands.scored.size());
  const auto recs = engine->recommend(month, available);
  const std::vector<int> steps{0, 2, 4, 6, 8, 10};
  std::vector<int> incs = steps;
  incs.push_back(available);
  const auto curve = equity_curve(engine->scores(month).scores, recs, incs, engine->snapshot());
  const double elapsed = seconds_since(t0);
  *setup_s = elapsed;

  std::vector<double> g;
  for (const auto& pt : curve) g.push_back(pt.report.of(GroupVariable::income).gini.value_or(NAN));
  bool stepwise = true;
  for (std::size_t i = 1; i < steps.size(); ++i) stepwise = stepwise && g[i] < g[i - 1];
  const bool endpoint = g.back() < g.front();
  std::string values;
  for (std::size_t i = 0; i < g.size(); ++i) values += fmt::format("{}{}:{:.4f}", i ? " " : "", curve[i].used, g[i]);
  *engine_out = std::move(engine);
  *month_out = month;
  return {stepwise && endpoint && elapsed < kCurveBudgetS,
          fmt::format("income Gini by increment [{}]; {} recommendations available; {:.2f} s", values, available,
                      elapsed)};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) { return std::system((cmd + " 2>/dev/null").c_str()); }

Outcome cli_determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / fmt::format("bikeaccess_acceptance_{}", ::getpid());
  fs::remove_all(root);
  std::vector<std::string> wptal, recs;
  for (int r = 0; r < 2; ++r) {
    const fs::path dir = root / fmt::format("run{}", r);
    const std::string city = (dir / "city").string();
    const std::string model = (dir / "model.txt").string();
    const std::string q = "'";
    if (run(q + cli + "' synth --kind grid --seed 7 --out-dir '" + city + "' > /dev/null") != 0) {
      return {false, "synth failed"};
    }
    if (run(q + cli + "' demand-train --data-dir '" + city + "' --seed 42 --model '" + model + "' -o '" +
            (dir / "loss.csv").string() + "'") != 0) {
      return {false, "demand-train failed"};
    }
    for (int k = 0; k < 2; ++k) {
      const fs::path w = dir / fmt::format("wptal{}.csv", k);
      const fs::path rc = dir / fmt::format("recommend{}.csv", k);
      if (run(q + cli + "' wptal --data-dir '" + city + "' --model '" + model + "' --month 2024-06 -o '" +
              w.string() + "'") != 0 ||
          run(q + cli + "' recommend --data-dir '" + city + "' --model '" + model + "' --month 2024-06 -n 10 -o '" +
              rc.string() + "'") != 0) {
        return {false, "wptal or recommend failed"};
      }
      wptal.push_back(slurp(w));
      recs.push_back(slurp(rc));
    }
  }
  fs::remove_all(root);
  const bool same_w = std::all_of(wptal.begin(), wptal.end(), [&](const std::string& s) { return s == wptal[0]; });
  const bool same_r = std::all_of(recs.begin(), recs.end(), [&](const std::string& s) { return s == recs[0]; });
  const bool nonempty = wptal[0].size() > 100 && std::count(recs[0].begin(), recs[0].end(), '\n') > 1;
  return {same_w && same_r && nonempty,
          fmt::format("4 wptal outputs ({} bytes) identical: {}; 4 recommend outputs ({} bytes) identical: {}",
                      wptal[0].size(), same_w, recs[0].size(), same_r)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    fmt::print(stderr, "usage: {} <path to bikeaccess CLI>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];

  report("edf-exactness", edf_exactness);
  report("ptal-exactness", ptal_exactness);
  report("gini-oracle", gini_oracle);
  report("routing-oracle", routing_oracle);
  report("demand-model", demand_model);

  std::unique_ptr<Engine> grid;
  Month month;
  double curve_s = 0.0;
  const Outcome curve = [&] {
    try {
      return equity_curve_scenario(&curve_s, &grid, &month);
    } catch (const std::exception& e) {
      return Outcome{false, fmt::format("threw: {}", e.what())};
    }
  }();
  report("placement", [&] {
    if (!grid) return Outcome{false, "grid city unavailable"};
    return placement(*grid, month);
  });
  report("equity-curve", [&] { return curve; });
  report("cli-determinism", [&] { return cli_determinism(cli); });

  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
