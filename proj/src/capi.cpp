#include "bikeaccess.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "bikeaccess/engine.hpp"
#include "bikeaccess/error.hpp"
#include "bikeaccess/service.hpp"
#include "bikeaccess/synthetic.hpp"

using namespace bikeaccess;

struct ba_engine {
  std::shared_ptr<const Engine> engine;
  std::mutex warnings_mutex;
  Warnings warnings;

  void keep(Warnings&& w) {
    std::lock_guard lock(warnings_mutex);
    warnings.insert(warnings.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
};

struct ba_service {
  std::unique_ptr<Service> service;
};

namespace {

thread_local std::string g_last_error;

ba_status status_of(ErrorCode code) { return static_cast<ba_status>(static_cast<int>(code)); }

template <class F>
ba_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return BA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BA_ERR_INTERNAL;
  }
}

char* copy_string(std::string_view s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw InvalidArgument(fmt::format("{} must not be NULL", what));
}

std::filesystem::path optional_path(const char* p) { return (p && *p) ? std::filesystem::path(p) : std::filesystem::path(); }

std::optional<std::filesystem::path> maybe_path(const char* p) {
  if (!p || !*p) return std::nullopt;
  return std::filesystem::path(p);
}

InputPaths to_paths(const ba_input_paths* in) {
  require(in, "paths");
  InputPaths p;
  p.network = optional_path(in->network);
  p.stations = optional_path(in->stations);
  p.demand = optional_path(in->demand);
  p.entrances = optional_path(in->entrances);
  p.schedules = optional_path(in->schedules);
  p.zones = optional_path(in->zones);
  p.pois = optional_path(in->pois);
  return p;
}

AccessParams to_access(const ba_access_params& a) {
  AccessParams p;
  p.window_start = a.window_start_min;
  p.window_end = a.window_end_min;
  p.reliability_buffer = a.reliability_buffer_min;
  p.edf_numerator = a.edf_numerator;
  p.secondary_weight = a.secondary_weight;
  p.entrance_radius = a.entrance_radius_m;
  return p;
}

PlacementParams to_placement(const ba_placement_params& a) {
  PlacementParams p;
  p.min_spacing_m = a.min_spacing_m;
  p.walkable_classes.clear();
  for (std::size_t i = 0; i < kRoadClassCount; ++i) {
    if (a.walkable_mask & (1u << i)) p.walkable_classes.push_back(kAllRoadClasses[i]);
  }
  p.equity_filter = a.require_both ? EquityFilter::income_and_minority : EquityFilter::income_or_minority;
  return p;
}

Month month_arg(const char* month) {
  require(month, "month");
  return Month::parse(month);
}

void set_out(char** out, std::string_view s) {
  if (out) *out = copy_string(s);
}


template <class F>
ba_status engine_call(ba_engine* engine, char** out, F&& f) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    Warnings w;
    const std::string text = f(*engine->engine, w);
    engine->keep(std::move(w));
    set_out(out, text);
  });
}

}  // namespace

extern "C" {

const char* ba_status_name(ba_status status) {
  if (status == BA_OK) return "ok";
  if (status == BA_ERR_INTERNAL) return "internal";
  return to_string(static_cast<ErrorCode>(static_cast<int>(status)));
}

const char* ba_last_error(void) { return g_last_error.c_str(); }

void ba_string_free(char* s) { std::free(s); }

void ba_access_params_default(ba_access_params* out) {
  if (!out) return;
  const AccessParams p;
  *out = ba_access_params{p.window_start,     p.window_end,       p.reliability_buffer,
                          p.edf_numerator,    p.secondary_weight, p.entrance_radius};
}

void ba_placement_params_default(ba_placement_params* out) {
  if (!out) return;
  const PlacementParams p;
  uint32_t mask = 0;
  for (RoadClass c : p.walkable_classes) mask |= 1u << static_cast<unsigned>(c);
  *out = ba_placement_params{p.min_spacing_m, mask, p.equity_filter == EquityFilter::income_and_minority ? 1 : 0};
}

void ba_train_config_default(ba_train_config* out) {
  if (!out) return;
  const TrainConfig c;
  *out = ba_train_config{c.epochs, c.learning_rate, c.seed, c.hidden, c.neighbors};
}

ba_status ba_input_paths_in_directory(const char* dir, ba_input_paths* out) {
  thread_local std::vector<std::string> storage;
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    const InputPaths p = InputPaths::in_directory(dir);
    storage = {p.network.string(),   p.stations.string(), p.demand.string(), p.entrances.string(),
               p.schedules.string(), p.zones.string(),    p.pois.string()};
    *out = ba_input_paths{storage[0].c_str(), storage[1].c_str(), storage[2].c_str(), storage[3].c_str(),
                          storage[4].c_str(), storage[5].c_str(), storage[6].c_str()};
  });
}

ba_status ba_ingest(const ba_input_paths* paths, const char* out_dir, char** report_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const CitySnapshot snap = load_city_snapshot(to_paths(paths));
    write_city_snapshot(snap, out_dir);
    if (report_json) {
      nlohmann::ordered_json j;
      j["schema_version"] = kSchemaVersion;
      j["nodes"] = snap.network.node_count();
      j["edges"] = snap.network.edges().size();
      j["stations"] = snap.stations.size();
      j["entrances"] = snap.entrances.size();
      j["schedules"] = snap.schedules.size();
      j["zones"] = snap.zones.size();
      j["pois"] = snap.pois.size();
      j["warnings"] = snap.warnings;
      *report_json = copy_string(dump_json(j));
    }
  });
}

ba_status ba_synthesize(const char* kind, uint64_t seed, const char* out_dir) {
  return guarded([&] {
    require(kind, "kind");
    require(out_dir, "out_dir");
    const std::string_view k(kind);
    SnapshotParts parts;
    if (k == "grid") {
      synthetic::GridCityOptions opt;
      opt.seed = seed;
      parts = synthetic::equity_grid_city(opt);
    } else if (k == "linear") {
      parts = synthetic::linear_demand_city(60, 12, seed);
    } else {
      throw InvalidArgument(fmt::format("unknown synthetic city '{}'; expected grid or linear", k));
    }
    std::filesystem::create_directories(out_dir);
    write_city_snapshot(assemble_snapshot(std::move(parts)), out_dir);
  });
}

ba_status ba_train(const ba_input_paths* paths, const char* embeddings, const ba_train_config* config,
                   const char* model_out, char** loss_csv) {
  return guarded([&] {
    require(model_out, "model_out");
    TrainConfig cfg;
    if (config) {
      cfg.epochs = config->epochs;
      cfg.learning_rate = config->learning_rate;
      cfg.seed = config->seed;
      cfg.hidden = config->hidden;
      cfg.neighbors = config->neighbors;
    }
    cfg.validate();
    const CitySnapshot snap = load_city_snapshot(to_paths(paths));
    std::optional<EmbeddingTable> table;
    if (auto p = maybe_path(embeddings)) table = EmbeddingTable::load(*p);
    const ModelContext ctx(snap, std::move(table));
    const auto labels = collect_labels(snap);
    const TrainResult result = train(cfg, ctx, labels);
    result.params.save(model_out);
    if (loss_csv) {
      std::string csv = "epoch,loss\n";
      for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        csv += fmt::format("{},{:.9g}\n", e, result.loss_history[e]);
      }
      *loss_csv = copy_string(csv);
    }
  });
}

ba_status ba_engine_open(const ba_input_paths* paths, const char* embeddings, const char* model,
                         const ba_access_params* access, const ba_placement_params* placement, ba_engine** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    EngineOptions options;
    if (access) options.access = to_access(*access);
    if (placement) options.placement = to_placement(*placement);
    auto handle = std::make_unique<ba_engine>();
    handle->engine = Engine::load(to_paths(paths), maybe_path(embeddings), maybe_path(model), options);
    handle->keep(Warnings(handle->engine->snapshot().warnings));
    *out = handle.release();
  });
}

void ba_engine_close(ba_engine* engine) { delete engine; }

ba_status ba_engine_take_warnings(ba_engine* engine, char** out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    std::string text;
    {
      std::lock_guard lock(engine->warnings_mutex);
      for (const std::string& w : engine->warnings) text += w + "\n";
      engine->warnings.clear();
    }
    *out = copy_string(text);
  });
}


ba_status ba_engine_ptal_csv(ba_engine* engine, const char* month, char** out) {
  return engine_call(engine, out, [&](const Engine& e, Warnings& w) { return e.ptal_csv(month_arg(month), &w); });
}

ba_status ba_engine_predict_csv(ba_engine* engine, const char* month, char** out) {
  return engine_call(engine, out, [&](const Engine& e, Warnings& w) { return e.predict_csv(month_arg(month), &w); });
}

ba_status ba_engine_wptal_csv(ba_engine* engine, const char* month, char** out) {
  return engine_call(engine, out, [&](const Engine& e, Warnings& w) { return e.wptal_csv(month_arg(month), &w); });
}

ba_status ba_engine_equity_json(ba_engine* engine, const char* month, const char* additions_csv, char** out) {
  return engine_call(engine, out, [&](const Engine& e, Warnings& w) {
    const Month m = month_arg(month);
    std::vector<AccessScore> additions;
    if (auto p = maybe_path(additions_csv)) {
      std::ifstream probe(*p);
      if (!probe) throw Error(ErrorCode::Io, fmt::format("cannot open '{}'", p->string()));
      const std::string text((std::istreambuf_iterator<char>(probe)), std::istreambuf_iterator<char>());
      additions = parse_recommendations_csv(text, m, p->filename().string());
    }
    return e.equity_json(m, additions, &w);
  });
}

ba_status ba_engine_recommend(ba_engine* engine, const char* month, int n, int as_json, char** out) {
  return engine_call(engine, out, [&](const Engine& e, Warnings& w) {
    return as_json ? e.recommend_json(month_arg(month), n, &w) : e.recommend_csv(month_arg(month), n, &w);
  });
}

ba_status ba_engine_curve_json(ba_engine* engine, const char* month, const int* increments, size_t count, char** out) {
  return engine_call(engine, out, [&](const Engine& e, Warnings& w) {
    if (count > 0) require(increments, "increments");
    const std::vector<int> inc(increments, increments + count);
    return e.curve_json(month_arg(month), inc, &w);
  });
}

ba_status ba_service_create(ba_engine* engine, const char* default_month, size_t capacity, ba_service** out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<ba_service>();
    handle->service = std::make_unique<Service>(engine->engine, month_arg(default_month), capacity);
    *out = handle.release();
  });
}

void ba_service_destroy(ba_service* service) { delete service; }

ba_status ba_service_handle(ba_service* service, const char* method, const char* path, const char* query,
                            const char* body, size_t body_len, int* http_status, const char** content_type,
                            char** response) {
  return guarded([&] {
    require(service, "service");
    require(method, "method");
    require(path, "path");
    require(http_status, "http_status");
    require(response, "response");
    const std::string_view b = body ? std::string_view(body, body_len) : std::string_view();
    HttpResponse r = service->service->handle(method, path, query ? query : "", b);
    *http_status = r.status;
    if (content_type) *content_type = r.content_type == "text/csv" ? "text/csv" : "application/json";
    *response = copy_string(r.body);
  });
}

}  // extern "C"
