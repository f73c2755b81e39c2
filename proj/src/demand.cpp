#include "bikeaccess/demand.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"
#include "text_io.hpp"

namespace bikeaccess {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Standardization and local graphs
// ---------------------------------------------------------------------------

namespace {

bool constant_column(double std_value, double mean) { return std_value <= 1e-12 * std::max(1.0, std::abs(mean)); }

// Like standardize_features() but accepts a single row (all columns constant).
Standardization column_stats(std::span<const std::vector<double>> rows, std::size_t width) {
  Standardization st;
  st.mean.assign(width, 0.0);
  st.std.assign(width, 0.0);
  if (rows.empty()) return st;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < width; ++c) st.mean[c] += r[c];
  }
  for (double& m : st.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < width; ++c) {
      const double d = r[c] - st.mean[c];
      st.std[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    st.std[c] = std::sqrt(st.std[c] / n);
    if (constant_column(st.std[c], st.mean[c])) st.std[c] = 0.0;
  }
  return st;
}

struct Ranked {
  double distance;
  const Station* station;
};

std::vector<std::string> take_nearest(std::vector<Ranked> ranked, int k) {
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.station->station_id < b.station->station_id;
  });
  std::vector<std::string> out;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  for (std::size_t i = 0; i < n; ++i) out.push_back(ranked[i].station->station_id);
  return out;
}

LocalGraphs local_graphs(const Station& target, std::span<const Station* const> pool, int k,
                         const Standardization& stats) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (pool.empty()) throw InvalidArgument(fmt::format("empty neighbor pool for station '{}'", target.station_id));
  const std::vector<double> target_std = stats.apply(to_vector(target.static_features));
  std::vector<Ranked> geo;
  std::vector<Ranked> sim;
  geo.reserve(pool.size());
  sim.reserve(pool.size());
  for (const Station* s : pool) {
    if (s->station_id == target.station_id) {
      throw InvalidArgument(fmt::format("neighbor pool contains the target '{}'", target.station_id));
    }
    geo.push_back(Ranked{haversine_m(target.location, s->location), s});
    const std::vector<double> other = stats.apply(to_vector(s->static_features));
    double d2 = 0.0;
    for (std::size_t c = 0; c < other.size(); ++c) d2 += (other[c] - target_std[c]) * (other[c] - target_std[c]);
    sim.push_back(Ranked{std::sqrt(d2), s});
  }
  return LocalGraphs{take_nearest(std::move(geo), k), take_nearest(std::move(sim), k)};
}

}  // namespace

std::vector<double> Standardization::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw InvalidArgument("standardization width mismatch");
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = std[c] > 0.0 ? (row[c] - mean[c]) / std[c] : 0.0;
  return out;
}

StandardizedFeatures standardize_features(std::span<const std::vector<double>> rows) {
  if (rows.size() < 2) throw InvalidArgument("standardization needs at least two stations");
  const std::size_t width = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != width) throw InvalidArgument("ragged feature rows");
  }
  StandardizedFeatures out;
  out.stats = column_stats(rows, width);
  out.rows.reserve(rows.size());
  for (const auto& r : rows) out.rows.push_back(out.stats.apply(r));
  return out;
}

std::vector<double> to_vector(const FeatureVector& f) { return std::vector<double>(f.begin(), f.end()); }

LocalGraphs build_local_graphs(const Station& target, std::span<const Station> pool, int k,
                               const Standardization& static_stats) {
  std::vector<const Station*> ptrs;
  for (const Station& s : pool) ptrs.push_back(&s);
  return local_graphs(target, ptrs, k, static_stats);
}

LocalGraphs build_local_graphs(const Station& target, std::span<const Station> pool, int k) {
  if (pool.empty()) throw InvalidArgument(fmt::format("empty neighbor pool for station '{}'", target.station_id));
  std::vector<std::vector<double>> rows;
  rows.push_back(to_vector(target.static_features));
  for (const Station& s : pool) rows.push_back(to_vector(s.static_features));
  return build_local_graphs(target, pool, k, standardize_features(rows).stats);
}

std::array<double, 3> temporal_features(const Month& month, int base_year) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(month.month) / 12.0;
  return {std::sin(angle), std::cos(angle), static_cast<double>(month.year - base_year)};
}

// ---------------------------------------------------------------------------
// Embedding table
// ---------------------------------------------------------------------------

EmbeddingTable EmbeddingTable::parse(std::string_view text, std::string_view name) {
  // Header width defines D, so read the header before the generic parser.
  const std::size_t nl = text.find('\n');
  std::string header(text.substr(0, nl));
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> cols;
  std::vector<std::string_view> expected;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 2 || cols[0] != "station_id") {
    throw ParseError(std::string(name), 1, "expected header 'station_id,e0,e1,...'");
  }
  for (std::size_t i = 1; i < cols.size(); ++i) {
    if (cols[i] != fmt::format("e{}", i - 1)) throw ParseError(std::string(name), 1, fmt::format("expected column 'e{}'", i - 1));
  }
  for (const auto& c : cols) expected.push_back(c);

  EmbeddingTable table;
  table.dim = static_cast<int>(cols.size()) - 1;
  for (const auto& row : io::parse_csv(text, name, expected)) {
    std::vector<double> v;
    for (std::size_t i = 1; i < row.fields.size(); ++i) {
      v.push_back(io::parse_double(row.fields[i], name, row.line, cols[i]));
    }
    if (!table.rows.emplace(row.fields[0], std::move(v)).second) {
      throw ParseError(std::string(name), row.line, fmt::format("duplicate station_id '{}'", row.fields[0]));
    }
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  return parse(io::read_file(path), path.string());
}

std::string EmbeddingTable::to_csv() const {
  std::string out = "station_id";
  for (int i = 0; i < dim; ++i) out += fmt::format(",e{}", i);
  out += '\n';
  for (const auto& [id, v] : rows) {
    out += io::csv_field(id);
    for (double x : v) out += fmt::format(",{}", x);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

NetworkWeights NetworkWeights::zeros(const ModelDims& d) {
  NetworkWeights w;
  w.embed_w = MatrixXd::Zero(d.hidden, d.node_input());
  w.embed_b = VectorXd::Zero(d.hidden);
  w.shared_w = MatrixXd::Zero(d.hidden, d.hidden);
  w.attn_w1 = MatrixXd::Zero(d.hidden, 2 * d.hidden);
  w.attn_b1 = VectorXd::Zero(d.hidden);
  w.attn_w2 = VectorXd::Zero(d.hidden);
  w.attn_b2 = VectorXd::Zero(1);
  w.head_w1 = MatrixXd::Zero(d.hidden, d.head_input());
  w.head_b1 = VectorXd::Zero(d.hidden);
  w.head_w2 = VectorXd::Zero(d.hidden);
  w.head_b2 = VectorXd::Zero(1);
  return w;
}

NetworkWeights NetworkWeights::uniform(const ModelDims& dims, std::uint64_t seed) {
  NetworkWeights w = zeros(dims);
  std::mt19937_64 rng(seed);
  for (auto& t : w.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      t.data[i] = -0.1 + 0.2 * u;
    }
  }
  return w;
}

std::vector<NetworkWeights::TensorRef> NetworkWeights::tensors() {
  auto ref = [](std::string_view name, auto& m) { return TensorRef{name, m.data(), m.rows(), m.cols()}; };
  return {ref("embed_w", embed_w), ref("embed_b", embed_b), ref("shared_w", shared_w),
          ref("attn_w1", attn_w1), ref("attn_b1", attn_b1), ref("attn_w2", attn_w2),
          ref("attn_b2", attn_b2), ref("head_w1", head_w1), ref("head_b1", head_b1),
          ref("head_w2", head_w2), ref("head_b2", head_b2)};
}

std::size_t NetworkWeights::parameter_count() const {
  auto& self = const_cast<NetworkWeights&>(*this);
  std::size_t n = 0;
  for (const auto& t : self.tensors()) n += static_cast<std::size_t>(t.size());
  return n;
}

VectorXd NetworkWeights::flatten() const {
  auto& self = const_cast<NetworkWeights&>(*this);
  VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (const auto& t : self.tensors()) {
    flat.segment(off, t.size()) = Eigen::Map<const VectorXd>(t.data, t.size());
    off += t.size();
  }
  return flat;
}

void NetworkWeights::assign(const VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) throw InvalidArgument("parameter vector size mismatch");
  Eigen::Index off = 0;
  for (auto& t : tensors()) {
    Eigen::Map<VectorXd>(t.data, t.size()) = flat.segment(off, t.size());
    off += t.size();
  }
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  p.weights = NetworkWeights::zeros(dims);
  return p;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kModelMagic = "bikeaccess-model";
constexpr int kModelVersion = 1;

class Tokens {
 public:
  explicit Tokens(std::string_view text) : text_(text) {}

  std::string_view next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size()) throw ModelError("model file truncated");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }
  void expect(std::string_view word) {
    const auto got = next();
    if (got != word) throw ModelError(fmt::format("model file: expected '{}', got '{}'", word, got));
  }
  double number() {
    const auto tok = next();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ModelError(fmt::format("model file: bad number '{}'", tok));
    return v;
  }
  long long integer() {
    const auto tok = next();
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ModelError(fmt::format("model file: bad integer '{}'", tok));
    return v;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string ModelParams::serialize() const {
  std::string out = fmt::format("{} {}\n", kModelMagic, kModelVersion);
  out += fmt::format("embedding {}\nmonthly {}\nhidden {}\nneighbors {}\n", dims.embedding, dims.monthly, dims.hidden,
                     neighbors);
  out += fmt::format("target_scale {}\nbase_year {}\n", scaling.target_scale, scaling.base_year);
  out += "monthly_mean";
  for (double v : scaling.monthly_mean) out += fmt::format(" {}", v);
  out += "\nmonthly_std";
  for (double v : scaling.monthly_std) out += fmt::format(" {}", v);
  out += '\n';
  auto& w = const_cast<NetworkWeights&>(weights);
  for (const auto& t : w.tensors()) {
    out += fmt::format("tensor {} {} {}\n", t.name, t.rows, t.cols);
    // Eigen storage is column-major; rows are written as text rows.
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        if (c) out += ' ';
        out += fmt::format("{}", t.data[c * t.rows + r]);
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

ModelParams ModelParams::deserialize(std::string_view text) {
  Tokens tok(text);
  tok.expect(kModelMagic);
  if (tok.integer() != kModelVersion) throw ModelError("unsupported model file version");
  ModelParams p;
  tok.expect("embedding");
  p.dims.embedding = static_cast<int>(tok.integer());
  tok.expect("monthly");
  p.dims.monthly = static_cast<int>(tok.integer());
  tok.expect("hidden");
  p.dims.hidden = static_cast<int>(tok.integer());
  tok.expect("neighbors");
  p.neighbors = static_cast<int>(tok.integer());
  if (p.dims.embedding < 1 || p.dims.hidden < 1 || p.dims.monthly != static_cast<int>(monthly::kCount) ||
      p.neighbors < 1) {
    throw ModelError("model file: invalid dimensions");
  }
  tok.expect("target_scale");
  p.scaling.target_scale = tok.number();
  tok.expect("base_year");
  p.scaling.base_year = static_cast<int>(tok.integer());
  tok.expect("monthly_mean");
  for (double& v : p.scaling.monthly_mean) v = tok.number();
  tok.expect("monthly_std");
  for (double& v : p.scaling.monthly_std) v = tok.number();
  p.weights = NetworkWeights::zeros(p.dims);
  for (auto& t : p.weights.tensors()) {
    tok.expect("tensor");
    tok.expect(t.name);
    if (tok.integer() != t.rows || tok.integer() != t.cols) {
      throw ModelError(fmt::format("model file: tensor '{}' has wrong shape", t.name));
    }
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) t.data[c * t.rows + r] = tok.number();
    }
  }
  tok.expect("end");
  return p;
}

void ModelParams::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

ModelParams ModelParams::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) return {};
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> attention_scores(const VectorXd& h_target, std::span<const VectorXd> neighbor_hs,
                                     const NetworkWeights& w) {
  const Eigen::Index H = w.shared_w.rows();
  const VectorXd gi = w.shared_w * h_target;
  const VectorXd left = w.attn_w1.leftCols(H) * gi + w.attn_b1;
  std::vector<double> scores;
  scores.reserve(neighbor_hs.size());
  for (const VectorXd& hj : neighbor_hs) {
    const VectorXd a = (left + w.attn_w1.rightCols(H) * (w.shared_w * hj)).cwiseMax(0.0);
    scores.push_back(w.attn_w2.dot(a) + w.attn_b2(0));
  }
  return scores;
}

std::vector<double> attention_weights(const VectorXd& h_target, std::span<const VectorXd> neighbor_hs,
                                      const NetworkWeights& w) {
  if (neighbor_hs.empty()) throw InvalidArgument("attention needs at least one neighbor");
  const auto scores = attention_scores(h_target, neighbor_hs, w);
  return softmax(scores);
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

VectorXd relu_mask(const VectorXd& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

struct GraphCache {
  std::vector<VectorXd> a_pre;  // per neighbor
  std::vector<VectorXd> a;
  std::vector<double> eps;
  VectorXd s;
};

struct SampleCache {
  GraphCache graph[2];  // proximity, similarity
  VectorXd xcat;
  VectorXd z_pre;
  VectorXd z;
  double out = 0.0;  // before target scaling
};

struct Cache {
  std::vector<VectorXd> h_pre, h, g, left, right;
  std::vector<SampleCache> samples;
};

const std::vector<int>& neighbors_of(const GraphBatch::Sample& s, int graph) {
  return graph == 0 ? s.proximity : s.similarity;
}

void check_batch(const ModelParams& p, const GraphBatch& batch) {
  for (const auto& x : batch.nodes) {
    if (x.size() != p.dims.node_input()) {
      throw ModelError(fmt::format("node input has {} values, model expects {}", x.size(), p.dims.node_input()));
    }
  }
  for (const auto& s : batch.samples) {
    const auto n = static_cast<int>(batch.nodes.size());
    if (s.target < 0 || s.target >= n || s.proximity.empty() || s.similarity.empty()) {
      throw ModelError("malformed sample in batch");
    }
    for (int g = 0; g < 2; ++g) {
      for (int j : neighbors_of(s, g)) {
        if (j < 0 || j >= n) throw ModelError("neighbor index out of range");
      }
    }
  }
}

void run_forward(const ModelParams& p, const GraphBatch& batch, Cache& c) {
  check_batch(p, batch);
  const NetworkWeights& w = p.weights;
  const Eigen::Index H = p.dims.hidden;
  const std::size_t n = batch.nodes.size();
  c.h_pre.resize(n);
  c.h.resize(n);
  c.g.resize(n);
  c.left.resize(n);
  c.right.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.h_pre[i] = w.embed_w * batch.nodes[i] + w.embed_b;
    c.h[i] = c.h_pre[i].cwiseMax(0.0);
    c.g[i] = w.shared_w * c.h[i];
    c.left[i] = w.attn_w1.leftCols(H) * c.g[i];
    c.right[i] = w.attn_w1.rightCols(H) * c.g[i];
  }

  const Eigen::Index base = p.dims.node_input();
  c.samples.resize(batch.samples.size());
  for (std::size_t si = 0; si < batch.samples.size(); ++si) {
    const auto& s = batch.samples[si];
    SampleCache& sc = c.samples[si];
    sc.xcat.resize(p.dims.head_input());
    sc.xcat.head(base) = batch.nodes[s.target];
    for (int t = 0; t < ModelDims::temporal; ++t) sc.xcat(base + t) = s.temporal[t];
    for (int gr = 0; gr < 2; ++gr) {
      GraphCache& gc = sc.graph[gr];
      const auto& nb = neighbors_of(s, gr);
      gc.a_pre.resize(nb.size());
      gc.a.resize(nb.size());
      std::vector<double> scores(nb.size());
      for (std::size_t k = 0; k < nb.size(); ++k) {
        gc.a_pre[k] = c.left[s.target] + c.right[nb[k]] + w.attn_b1;
        gc.a[k] = gc.a_pre[k].cwiseMax(0.0);
        scores[k] = w.attn_w2.dot(gc.a[k]) + w.attn_b2(0);
      }
      gc.eps = softmax(scores);
      gc.s = VectorXd::Zero(H);
      for (std::size_t k = 0; k < nb.size(); ++k) gc.s += gc.eps[k] * c.h[nb[k]];
      sc.xcat.segment(base + ModelDims::temporal + gr * H, H) = gc.s;
    }
    sc.z_pre = w.head_w1 * sc.xcat + w.head_b1;
    sc.z = sc.z_pre.cwiseMax(0.0);
    sc.out = w.head_w2.dot(sc.z) + w.head_b2(0);
  }
}

}  // namespace

std::vector<double> forward(const ModelParams& params, const GraphBatch& batch) {
  Cache c;
  run_forward(params, batch, c);
  std::vector<double> out;
  out.reserve(c.samples.size());
  for (const auto& sc : c.samples) out.push_back(params.scaling.target_scale * sc.out);
  return out;
}

double mse_loss(const ModelParams& params, const GraphBatch& batch, NetworkWeights* grad) {
  if (batch.samples.empty()) throw ModelError("empty batch");
  Cache c;
  run_forward(params, batch, c);
  const double scale = params.scaling.target_scale;
  const double n = static_cast<double>(batch.samples.size());
  double loss = 0.0;
  for (std::size_t si = 0; si < batch.samples.size(); ++si) {
    const double r = scale * c.samples[si].out - batch.samples[si].label;
    loss += r * r;
  }
  loss /= n;
  if (!grad) return loss;

  const NetworkWeights& w = params.weights;
  const Eigen::Index H = params.dims.hidden;
  const Eigen::Index base = params.dims.node_input();
  *grad = NetworkWeights::zeros(params.dims);
  NetworkWeights& gw = *grad;

  const std::size_t nodes = batch.nodes.size();
  std::vector<VectorXd> d_h(nodes, VectorXd::Zero(H));
  std::vector<VectorXd> d_left(nodes, VectorXd::Zero(H));
  std::vector<VectorXd> d_right(nodes, VectorXd::Zero(H));

  for (std::size_t si = 0; si < batch.samples.size(); ++si) {
    const auto& s = batch.samples[si];
    const SampleCache& sc = c.samples[si];
    const double d_y = 2.0 * (scale * sc.out - s.label) / n;
    const double d_out = scale * d_y;

    gw.head_w2 += d_out * sc.z;
    gw.head_b2(0) += d_out;
    const VectorXd d_zpre = (d_out * w.head_w2).cwiseProduct(relu_mask(sc.z_pre));
    gw.head_w1.noalias() += d_zpre * sc.xcat.transpose();
    gw.head_b1 += d_zpre;
    const VectorXd d_xcat = w.head_w1.transpose() * d_zpre;

    for (int gr = 0; gr < 2; ++gr) {
      const GraphCache& gc = sc.graph[gr];
      const auto& nb = neighbors_of(s, gr);
      const VectorXd d_s = d_xcat.segment(base + ModelDims::temporal + gr * H, H);
      std::vector<double> d_eps(nb.size());
      double weighted = 0.0;
      for (std::size_t k = 0; k < nb.size(); ++k) {
        d_eps[k] = d_s.dot(c.h[nb[k]]);
        d_h[nb[k]] += gc.eps[k] * d_s;
        weighted += gc.eps[k] * d_eps[k];
      }
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const double d_score = gc.eps[k] * (d_eps[k] - weighted);
        gw.attn_w2 += d_score * gc.a[k];
        gw.attn_b2(0) += d_score;
        const VectorXd d_apre = (d_score * w.attn_w2).cwiseProduct(relu_mask(gc.a_pre[k]));
        gw.attn_b1 += d_apre;
        d_left[s.target] += d_apre;
        d_right[nb[k]] += d_apre;
      }
    }
  }

  for (std::size_t i = 0; i < nodes; ++i) {
    if (d_left[i].isZero(0.0) && d_right[i].isZero(0.0) && d_h[i].isZero(0.0)) continue;
    gw.attn_w1.leftCols(H).noalias() += d_left[i] * c.g[i].transpose();
    gw.attn_w1.rightCols(H).noalias() += d_right[i] * c.g[i].transpose();
    const VectorXd d_g = w.attn_w1.leftCols(H).transpose() * d_left[i] + w.attn_w1.rightCols(H).transpose() * d_right[i];
    gw.shared_w.noalias() += d_g * c.h[i].transpose();
    const VectorXd d_hpre = (d_h[i] + w.shared_w.transpose() * d_g).cwiseProduct(relu_mask(c.h_pre[i]));
    gw.embed_w.noalias() += d_hpre * batch.nodes[i].transpose();
    gw.embed_b += d_hpre;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Snapshot binding
// ---------------------------------------------------------------------------

std::vector<LabeledSample> collect_labels(const CitySnapshot& snap) {
  std::vector<LabeledSample> out;
  for (const Station& s : snap.stations) {
    if (s.status != StationStatus::existing) continue;
    for (const auto& [m, trips] : s.observed_demand) out.push_back(LabeledSample{s.station_id, m, trips});
  }
  return out;
}

ModelContext::ModelContext(const CitySnapshot& snap, std::optional<EmbeddingTable> embeddings)
    : snap_(&snap), embeddings_(std::move(embeddings)) {
  // Statistics come from existing stations so that adding or removing
  // planned stations leaves every embedding unchanged.
  std::vector<std::vector<double>> rows;
  for (const Station& s : snap.stations) {
    if (s.status == StationStatus::existing) rows.push_back(to_vector(s.static_features));
  }
  if (rows.size() < 2) {
    rows.clear();
    for (const Station& s : snap.stations) rows.push_back(to_vector(s.static_features));
  }
  static_stats_ = column_stats(rows, feature::kCount);
  if (embeddings_ && embeddings_->dim < 1) throw ModelError("embedding table has no dimensions");
}

int ModelContext::embedding_dim() const {
  return embeddings_ ? embeddings_->dim : static_cast<int>(feature::kCount);
}

std::vector<double> ModelContext::region_embedding(const Station& station) const {
  if (!embeddings_) return static_stats_.apply(to_vector(station.static_features));
  if (auto it = embeddings_->rows.find(station.station_id); it != embeddings_->rows.end()) return it->second;
  // Stations without a row borrow the nearest station's embedding.
  const std::vector<double>* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Station& s : snap_->stations) {
    auto it = embeddings_->rows.find(s.station_id);
    if (it == embeddings_->rows.end()) continue;
    const double d = haversine_m(station.location, s.location);
    if (d < best_d) {
      best_d = d;
      best = &it->second;
    }
  }
  if (!best) throw ModelError(fmt::format("no region embedding available for station '{}'", station.station_id));
  return *best;
}

std::vector<Station> ModelContext::pool_at(const Month& month, std::string_view exclude_id) const {
  std::vector<Station> out;
  for (const Station& s : snap_->stations) {
    if (s.status == StationStatus::existing && s.operating_at(month) && s.station_id != exclude_id) out.push_back(s);
  }
  return out;
}

int ModelContext::node_for(GraphBatch& batch, std::map<std::pair<std::string, int>, int>& node_index,
                           const Station& s, const Month& month, const ModelParams& params) const {
  const auto key = std::make_pair(s.station_id, month.index());
  if (auto it = node_index.find(key); it != node_index.end()) return it->second;
  const std::vector<double> emb = region_embedding(s);
  if (static_cast<int>(emb.size()) != params.dims.embedding) {
    throw ModelError(fmt::format("embedding dimension {} does not match model dimension {}", emb.size(),
                                 params.dims.embedding));
  }
  const MonthlyFeatures mf = monthly_features(s, month, *snap_);
  VectorXd x(params.dims.node_input());
  for (std::size_t i = 0; i < emb.size(); ++i) x(static_cast<Eigen::Index>(i)) = emb[i];
  for (std::size_t i = 0; i < monthly::kCount; ++i) {
    const double sd = params.scaling.monthly_std[i];
    x(params.dims.embedding + static_cast<Eigen::Index>(i)) = sd > 0.0 ? (mf[i] - params.scaling.monthly_mean[i]) / sd : 0.0;
  }
  const int id = static_cast<int>(batch.nodes.size());
  batch.nodes.push_back(std::move(x));
  node_index.emplace(key, id);
  return id;
}

void ModelContext::append_sample(GraphBatch& batch, std::map<std::pair<std::string, int>, int>& node_index,
                                 const Station& target, const Month& month, double label,
                                 const ModelParams& params) const {
  std::vector<const Station*> pool;
  for (const Station& s : snap_->stations) {
    if (s.status == StationStatus::existing && s.operating_at(month) && s.station_id != target.station_id) {
      pool.push_back(&s);
    }
  }
  if (pool.empty()) {
    throw InvalidArgument(fmt::format("no existing stations operate in {} to serve as neighbors", month.str()));
  }
  const LocalGraphs graphs = local_graphs(target, pool, params.neighbors, static_stats_);

  GraphBatch::Sample sample;
  sample.target = node_for(batch, node_index, target, month, params);
  sample.temporal = temporal_features(month, params.scaling.base_year);
  sample.label = label;
  // Neighbor order is canonicalized by station_id so aggregation does not
  // depend on ranking order.
  auto resolve = [&](std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::vector<int> out;
    for (const auto& id : ids) out.push_back(node_for(batch, node_index, *snap_->find_station(id), month, params));
    return out;
  };
  sample.proximity = resolve(graphs.proximity);
  sample.similarity = resolve(graphs.similarity);
  batch.samples.push_back(std::move(sample));
}

GraphBatch ModelContext::make_batch(std::span<const LabeledSample> labels, const ModelParams& params,
                                    std::vector<std::string>* warnings) const {
  GraphBatch batch;
  std::map<std::pair<std::string, int>, int> node_index;
  for (const LabeledSample& l : labels) {
    const Station* s = snap_->find_station(l.station_id);
    if (!s) {
      if (warnings) warnings->push_back(fmt::format("label for unknown station '{}' ignored", l.station_id));
      continue;
    }
    try {
      append_sample(batch, node_index, *s, l.month, l.trips, params);
    } catch (const InvalidArgument& e) {
      if (warnings) warnings->push_back(fmt::format("label {}/{} skipped: {}", l.station_id, l.month.str(), e.what()));
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw InvalidArgument("invalid Adam moment parameters");
  }
  if (hidden < 1 || neighbors < 1) throw InvalidArgument("hidden size and neighbor count must be positive");
}

TrainResult train(const TrainConfig& config, const ModelContext& ctx, std::span<const LabeledSample> labels) {
  config.validate();
  if (labels.empty()) throw ModelError("no labeled samples to train on");

  TrainResult result;
  ModelParams& p = result.params;
  p.dims.embedding = ctx.embedding_dim();
  p.dims.hidden = config.hidden;
  p.neighbors = config.neighbors;

  const CitySnapshot& snap = ctx.snapshot();
  std::vector<std::vector<double>> monthly_rows;
  double label_sum = 0.0;
  int base_year = labels.front().month.year;
  for (const LabeledSample& l : labels) {
    base_year = std::min(base_year, l.month.year);
    label_sum += l.trips;
    if (const Station* s = snap.find_station(l.station_id)) {
      const MonthlyFeatures mf = monthly_features(*s, l.month, snap);
      monthly_rows.emplace_back(mf.begin(), mf.end());
    }
  }
  const Standardization mstats = column_stats(monthly_rows, monthly::kCount);
  p.scaling.monthly_mean = mstats.mean;
  p.scaling.monthly_std = mstats.std;
  const double label_mean = label_sum / static_cast<double>(labels.size());
  p.scaling.target_scale = label_mean > 0.0 ? label_mean : 1.0;
  p.scaling.base_year = base_year;
  p.weights = NetworkWeights::uniform(p.dims, config.seed);

  const GraphBatch batch = ctx.make_batch(labels, p, &result.warnings);
  if (batch.samples.empty()) throw ModelError("no usable labeled samples (every label lacked neighbors)");

  VectorXd theta = p.weights.flatten();
  VectorXd m1 = VectorXd::Zero(theta.size());
  VectorXd m2 = VectorXd::Zero(theta.size());
  NetworkWeights grad;
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs) + 1);

  auto checked = [&](double loss, int epoch) {
    if (!std::isfinite(loss)) {
      throw ModelError(fmt::format("training diverged: loss is {} at epoch {} (learning rate {})", loss, epoch,
                                   config.learning_rate));
    }
    return loss;
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = checked(mse_loss(p, batch, &grad), epoch - 1);
    result.loss_history.push_back(loss);
    const VectorXd g = grad.flatten();
    m1 = config.beta1 * m1 + (1.0 - config.beta1) * g;
    m2 = config.beta2 * m2 + (1.0 - config.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config.beta1, epoch);
    const double c2 = 1.0 - std::pow(config.beta2, epoch);
    theta.array() -= config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + config.epsilon);
    p.weights.assign(theta);
  }
  result.loss_history.push_back(checked(mse_loss(p, batch), config.epochs));
  return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

GraphAttentionPredictor::GraphAttentionPredictor(const ModelContext& ctx, ModelParams params)
    : ctx_(&ctx), params_(std::move(params)) {
  if (params_.dims.embedding != ctx.embedding_dim()) {
    throw ModelError(fmt::format("model expects {}-dimensional embeddings, inputs provide {}", params_.dims.embedding,
                                 ctx.embedding_dim()));
  }
}

double GraphAttentionPredictor::predict_raw(const Station& station, const Month& month) const {
  GraphBatch batch;
  std::map<std::pair<std::string, int>, int> index;
  ctx_->append_sample(batch, index, station, month, 0.0, params_);
  return forward(params_, batch).front();
}

double GraphAttentionPredictor::predict(const Station& station, const Month& month) const {
  return std::max(0.0, predict_raw(station, month));
}

// ---------------------------------------------------------------------------
// InfoNCE
// ---------------------------------------------------------------------------

double infonce_intra(std::span<const double> anchor, std::span<const double> positive,
                     std::span<const std::vector<double>> negatives, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("temperature must be positive");
  auto dot = [&](std::span<const double> b) {
    if (b.size() != anchor.size()) throw InvalidArgument("embedding dimension mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) d += anchor[i] * b[i];
    return d / tau;
  };
  const double pos = dot(positive);
  std::vector<double> logits{pos};
  for (const auto& n : negatives) logits.push_back(dot(n));
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  return mx + std::log(sum) - pos;
}

}  // namespace bikeaccess
