#pragma once

// Cold-start demand prediction: dual local graphs (geographic proximity and
// built-environment similarity) aggregated with learned softmax attention,
// followed by a two-layer regression head.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bikeaccess/accessibility.hpp"
#include "bikeaccess/geodata.hpp"

namespace bikeaccess {

// ---------------------------------------------------------------------------
// Features and local graphs
// ---------------------------------------------------------------------------

struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;  // population std (divide by N); 0 marks a constant column

  std::vector<double> apply(std::span<const double> row) const;
};

struct StandardizedFeatures {
  std::vector<std::vector<double>> rows;
  Standardization stats;
};

// Per-column zero mean / unit variance. Constant columns become zeros.
// Throws InvalidArgument for fewer than two rows or ragged input.
StandardizedFeatures standardize_features(std::span<const std::vector<double>> rows);

std::vector<double> to_vector(const FeatureVector& f);

struct LocalGraphs {
  std::vector<std::string> proximity;   // k nearest by haversine
  std::vector<std::string> similarity;  // k nearest in standardized static features
};

// Ties are broken by the smaller station_id. Throws InvalidArgument on an empty
// pool, k < 1, or a pool containing the target.
LocalGraphs build_local_graphs(const Station& target, std::span<const Station> pool, int k,
                               const Standardization& static_stats);
// Standardizes over pool + target.
LocalGraphs build_local_graphs(const Station& target, std::span<const Station> pool, int k);

// [sin(2 pi m / 12), cos(2 pi m / 12), year - base_year], m in 1..12.
std::array<double, 3> temporal_features(const Month& month, int base_year);

// ---------------------------------------------------------------------------
// Region embeddings
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  int dim = 0;
  std::map<std::string, std::vector<double>, std::less<>> rows;

  // embeddings.csv: station_id,e0,e1,...,e{D-1}
  static EmbeddingTable load(const std::filesystem::path& path);
  static EmbeddingTable parse(std::string_view text, std::string_view name = "embeddings.csv");
  std::string to_csv() const;
};

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

struct ModelDims {
  int embedding = 32;  // D
  int monthly = static_cast<int>(monthly::kCount);
  int hidden = 64;  // H
  static constexpr int temporal = 3;

  int node_input() const { return embedding + monthly; }
  int head_input() const { return embedding + monthly + temporal + 2 * hidden; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Trainable tensors.
struct NetworkWeights {
  Eigen::MatrixXd embed_w;  // H x (D+U); h = relu(embed_w x + embed_b)
  Eigen::VectorXd embed_b;
  Eigen::MatrixXd shared_w;  // H x H, applied to both ends of an attention pair
  Eigen::MatrixXd attn_w1;   // H x 2H over [W h_i ; W h_j]
  Eigen::VectorXd attn_b1;
  Eigen::VectorXd attn_w2;  // H
  Eigen::VectorXd attn_b2;  // 1
  Eigen::MatrixXd head_w1;  // H x concat
  Eigen::VectorXd head_b1;
  Eigen::VectorXd head_w2;  // H
  Eigen::VectorXd head_b2;  // 1

  static NetworkWeights zeros(const ModelDims& dims);
  // Every entry uniform in [-0.1, 0.1] from a 64-bit Mersenne Twister.
  static NetworkWeights uniform(const ModelDims& dims, std::uint64_t seed);

  struct TensorRef {
    std::string_view name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
  };
  std::vector<TensorRef> tensors();
  std::size_t parameter_count() const;

  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

// Fixed input/output scaling recorded at training time.
struct InputScaling {
  std::vector<double> monthly_mean = std::vector<double>(monthly::kCount, 0.0);
  std::vector<double> monthly_std = std::vector<double>(monthly::kCount, 1.0);
  double target_scale = 1.0;  // raw head output is multiplied by this
  int base_year = 0;
};

struct ModelParams {
  ModelDims dims;
  int neighbors = 5;  // k
  NetworkWeights weights;
  InputScaling scaling;

  static ModelParams zeros(const ModelDims& dims);

  // Self-describing text format; doubles use shortest round-trip form, so a
  // save/load cycle is bit-exact.
  std::string serialize() const;
  static ModelParams deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ModelParams load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> scores);

// Raw score Attn(W h_i || W h_j) for each neighbor.
std::vector<double> attention_scores(const Eigen::VectorXd& h_target, std::span<const Eigen::VectorXd> neighbor_hs,
                                     const NetworkWeights& w);
// Softmax of attention_scores(). Throws InvalidArgument on an empty neighbor list.
std::vector<double> attention_weights(const Eigen::VectorXd& h_target, std::span<const Eigen::VectorXd> neighbor_hs,
                                      const NetworkWeights& w);

// ---------------------------------------------------------------------------
// Batched forward / backward
// ---------------------------------------------------------------------------

// Node inputs are [x_c || scaled x_u]. Samples refer to nodes by index;
// neighbor lists must be non-empty.
struct GraphBatch {
  struct Sample {
    int target = 0;
    std::vector<int> proximity;
    std::vector<int> similarity;
    std::array<double, 3> temporal{};
    double label = 0.0;
  };
  std::vector<Eigen::VectorXd> nodes;
  std::vector<Sample> samples;
};

// Unclamped predictions (trips/month) for every sample.
std::vector<double> forward(const ModelParams& params, const GraphBatch& batch);

// Mean squared error over the batch; fills `grad` (same shapes as weights) if given.
double mse_loss(const ModelParams& params, const GraphBatch& batch, NetworkWeights* grad = nullptr);

// ---------------------------------------------------------------------------
// Snapshot binding, training, inference
// ---------------------------------------------------------------------------

struct LabeledSample {
  std::string station_id;
  Month month;
  double trips = 0.0;
};

// Observed demand of existing stations.
std::vector<LabeledSample> collect_labels(const CitySnapshot& snap);

// Binds a snapshot (and optional external embeddings) to the model inputs.
// Without a table, region embeddings fall back to the standardized 29 static
// features. Neighbor pools are existing stations operating in the month.
class ModelContext {
 public:
  ModelContext(const CitySnapshot& snap, std::optional<EmbeddingTable> embeddings = std::nullopt);

  const CitySnapshot& snapshot() const { return *snap_; }
  int embedding_dim() const;
  const Standardization& static_stats() const { return static_stats_; }
  const std::optional<EmbeddingTable>& embeddings() const { return embeddings_; }

  std::vector<double> region_embedding(const Station& station) const;
  std::vector<Station> pool_at(const Month& month, std::string_view exclude_id) const;

  // Appends one sample (and the nodes it needs) to `batch`. Throws
  // InvalidArgument when the neighbor pool is empty.
  void append_sample(GraphBatch& batch, std::map<std::pair<std::string, int>, int>& node_index,
                     const Station& target, const Month& month, double label, const ModelParams& params) const;

  GraphBatch make_batch(std::span<const LabeledSample> labels, const ModelParams& params,
                        std::vector<std::string>* warnings = nullptr) const;

 private:
  int node_for(GraphBatch& batch, std::map<std::pair<std::string, int>, int>& node_index, const Station& s,
               const Month& month, const ModelParams& params) const;

  const CitySnapshot* snap_;
  std::optional<EmbeddingTable> embeddings_;
  Standardization static_stats_;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;
  int hidden = 64;
  int neighbors = 5;

  void validate() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;  // epochs + 1 entries, initial loss first
  std::vector<std::string> warnings;
};

// Full-batch Adam on MSE. Throws ModelError when there are no usable labels or
// the loss becomes non-finite.
TrainResult train(const TrainConfig& config, const ModelContext& ctx, std::span<const LabeledSample> labels);

// Inference-only predictor; output clamped at zero.
class GraphAttentionPredictor final : public DemandPredictor {
 public:
  GraphAttentionPredictor(const ModelContext& ctx, ModelParams params);
  double predict(const Station& station, const Month& month) const override;
  double predict_raw(const Station& station, const Month& month) const;
  const ModelParams& params() const { return params_; }

 private:
  const ModelContext* ctx_;
  ModelParams params_;
};

// ---------------------------------------------------------------------------
// Contrastive utility
// ---------------------------------------------------------------------------

// -log(exp(z.z+/tau) / (exp(z.z+/tau) + sum_j exp(z.z-_j/tau))) for
// unit-normalized vectors. Throws InvalidArgument if tau <= 0.
double infonce_intra(std::span<const double> anchor, std::span<const double> positive,
                     std::span<const std::vector<double>> negatives, double tau);

}  // namespace bikeaccess
