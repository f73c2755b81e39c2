#include "bikeaccess/engine.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"
#include "text_io.hpp"

namespace bikeaccess {

namespace {

void append(Warnings* out, const std::vector<std::string>& items) {
  if (out) out->insert(out->end(), items.begin(), items.end());
}

}  // namespace

std::string dump_json(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

Engine::Engine(CitySnapshot snap, std::optional<EmbeddingTable> embeddings, std::optional<ModelParams> model,
               EngineOptions options)
    : snap_(std::make_unique<CitySnapshot>(std::move(snap))), options_(std::move(options)) {
  options_.access.validate();
  options_.placement.validate();
  context_ = std::make_unique<ModelContext>(*snap_, std::move(embeddings));
  if (model) predictor_ = std::make_unique<GraphAttentionPredictor>(*context_, std::move(*model));
}

std::unique_ptr<Engine> Engine::load(const InputPaths& paths, const std::optional<std::filesystem::path>& embeddings,
                                     const std::optional<std::filesystem::path>& model, EngineOptions options) {
  std::optional<EmbeddingTable> table;
  if (embeddings) table = EmbeddingTable::load(*embeddings);
  std::optional<ModelParams> params;
  if (model) params = ModelParams::load(*model);
  return std::make_unique<Engine>(load_city_snapshot(paths), std::move(table), std::move(params), std::move(options));
}

std::unique_ptr<Engine> Engine::with_snapshot(CitySnapshot snap) const {
  std::optional<ModelParams> model;
  if (predictor_) model = predictor_->params();
  return std::make_unique<Engine>(std::move(snap), context_->embeddings(), std::move(model), options_);
}

const DemandPredictor& Engine::demand() const {
  if (!predictor_) throw ModelError("no demand model loaded; run demand-train first or pass a model file");
  return *predictor_;
}

const ScoreBatch& Engine::scores(const Month& month) const {
  const DemandPredictor& model = demand();
  std::lock_guard lock(cache_mutex_);
  auto& slot = score_cache_[month];
  if (!slot) slot = std::make_unique<ScoreBatch>(score_all(*snap_, month, model, options_.access));
  return *slot;
}

const CandidateScores& Engine::candidates(const Month& month) const {
  const DemandPredictor& model = demand();
  std::lock_guard lock(cache_mutex_);
  auto& slot = candidate_cache_[month];
  if (!slot) {
    const std::vector<Candidate> sites = candidate_sites(*snap_, options_.placement);
    slot = std::make_unique<CandidateScores>(score_candidates(sites, *snap_, month, model, options_.access));
  }
  return *slot;
}

std::string Engine::ptal_csv(const Month& month, Warnings* warnings) const {
  std::string out = "station_id,month,ptal,n_entrances,n_subway_stations\n";
  for (const Station& s : snap_->stations) {
    if (s.status == StationStatus::existing) continue;
    const StationAccess a = station_access(s.location, *snap_, options_.access);
    append(warnings, a.warnings);
    out += fmt::format("{},{},{:.6f},{},{}\n", io::csv_field(s.station_id), month.str(), a.ptal, a.n_entrances,
                       a.edfs.size());
  }
  return out;
}

std::string Engine::predict_csv(const Month& month, Warnings* warnings) const {
  const DemandPredictor& model = demand();
  std::string out = "station_id,month,demand\n";
  for (const Station& s : snap_->stations) {
    if (s.status == StationStatus::existing) continue;
    try {
      out += fmt::format("{},{},{:.6f}\n", io::csv_field(s.station_id), month.str(), model.predict(s, month));
    } catch (const Error& e) {
      if (warnings) warnings->push_back(fmt::format("station '{}' skipped: {}", s.station_id, e.what()));
    }
  }
  return out;
}

std::string Engine::wptal_csv(const Month& month, Warnings* warnings) const {
  const ScoreBatch& batch = scores(month);
  append(warnings, batch.warnings);
  return scores_to_csv(batch.scores);
}

EquityReport Engine::equity(const Month& month, std::span<const AccessScore> additions, Warnings* warnings) const {
  const ScoreBatch& batch = scores(month);
  append(warnings, batch.warnings);
  std::vector<AccessScore> all(batch.scores.begin(), batch.scores.end());
  all.insert(all.end(), additions.begin(), additions.end());
  EquityReport report = equity_report(all, *snap_);
  append(warnings, report.warnings);
  return report;
}

std::string Engine::equity_json(const Month& month, std::span<const AccessScore> additions, Warnings* warnings) const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["month"] = month.str();
  j["n_additions"] = additions.size();
  const nlohmann::ordered_json report = to_json(equity(month, additions, warnings));
  for (const auto& [k, v] : report.items()) j[k] = v;
  return dump_json(j);
}

std::vector<ScoredCandidate> Engine::recommend(const Month& month, int n, Warnings* warnings) const {
  const CandidateScores& c = candidates(month);
  append(warnings, c.warnings);
  return bikeaccess::recommend(c.scored, n, options_.placement);
}

std::string Engine::recommend_csv(const Month& month, int n, Warnings* warnings) const {
  return recommendations_to_csv(recommend(month, n, warnings));
}

std::string Engine::recommend_json(const Month& month, int n, Warnings* warnings) const {
  const auto picks = recommend(month, n, warnings);
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["month"] = month.str();
  j["requested"] = n;
  j["recommendations"] = recommendations_to_json(picks);
  return dump_json(j);
}

std::string Engine::curve_json(const Month& month, std::span<const int> increments, Warnings* warnings) const {
  const int n = increments.empty() ? 0 : *std::max_element(increments.begin(), increments.end());
  const auto picks = recommend(month, n, warnings);
  const ScoreBatch& batch = scores(month);
  append(warnings, batch.warnings);
  const auto curve = equity_curve(batch.scores, picks, increments, *snap_);
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["month"] = month.str();
  j["available"] = picks.size();
  j["increments"] = curve_to_json(curve);
  return dump_json(j);
}

}  // namespace bikeaccess
