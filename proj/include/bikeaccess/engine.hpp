#pragma once

// Pipeline compositions shared by the CLI, the C API and the HTTP service.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bikeaccess/accessibility.hpp"
#include "bikeaccess/demand.hpp"
#include "bikeaccess/equity.hpp"
#include "bikeaccess/geodata.hpp"
#include "bikeaccess/placement.hpp"

namespace bikeaccess {

inline constexpr int kSchemaVersion = 1;

struct EngineOptions {
  AccessParams access;
  PlacementParams placement;
};

using Warnings = std::vector<std::string>;

class Engine {
 public:
  Engine(CitySnapshot snap, std::optional<EmbeddingTable> embeddings, std::optional<ModelParams> model,
         EngineOptions options = {});
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  static std::unique_ptr<Engine> load(const InputPaths& paths, const std::optional<std::filesystem::path>& embeddings,
                                      const std::optional<std::filesystem::path>& model, EngineOptions options = {});

  // Same embeddings, model and options over another snapshot.
  std::unique_ptr<Engine> with_snapshot(CitySnapshot snap) const;

  const CitySnapshot& snapshot() const { return *snap_; }
  const ModelContext& context() const { return *context_; }
  const EngineOptions& options() const { return options_; }
  bool has_model() const { return predictor_ != nullptr; }
  // Throws ModelError when no model is loaded.
  const DemandPredictor& demand() const;

  // Scores of cold-start and candidate stations; cached per month.
  const ScoreBatch& scores(const Month& month) const;
  // Scored candidate sites for the month; cached.
  const CandidateScores& candidates(const Month& month) const;

  std::string ptal_csv(const Month& month, Warnings* warnings = nullptr) const;
  std::string predict_csv(const Month& month, Warnings* warnings = nullptr) const;
  std::string wptal_csv(const Month& month, Warnings* warnings = nullptr) const;

  EquityReport equity(const Month& month, std::span<const AccessScore> additions, Warnings* warnings = nullptr) const;
  std::string equity_json(const Month& month, std::span<const AccessScore> additions,
                          Warnings* warnings = nullptr) const;

  std::vector<ScoredCandidate> recommend(const Month& month, int n, Warnings* warnings = nullptr) const;
  std::string recommend_csv(const Month& month, int n, Warnings* warnings = nullptr) const;
  std::string recommend_json(const Month& month, int n, Warnings* warnings = nullptr) const;

  // Uses the first max(increments) recommendations.
  std::string curve_json(const Month& month, std::span<const int> increments, Warnings* warnings = nullptr) const;

 private:
  std::unique_ptr<CitySnapshot> snap_;
  std::unique_ptr<ModelContext> context_;
  std::unique_ptr<GraphAttentionPredictor> predictor_;
  EngineOptions options_;

  mutable std::mutex cache_mutex_;
  mutable std::map<Month, std::unique_ptr<ScoreBatch>> score_cache_;
  mutable std::map<Month, std::unique_ptr<CandidateScores>> candidate_cache_;
};

// Pretty JSON text with a trailing newline.
std::string dump_json(const nlohmann::ordered_json& j);

}  // namespace bikeaccess
