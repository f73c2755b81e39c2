#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "bikeaccess/engine.hpp"

namespace bikeaccess {

struct Scenario {
  std::string scenario_id;
  Month month;
  std::map<std::string, GeoPoint> added_candidates;  // pin id -> point
  std::set<std::string> removed_station_ids;
};

// Pin ids derive from coordinates, so re-adding a point is a no-op.
std::string pin_id_for(const GeoPoint& p);

// Scores added pins as cold-start stations and recomputes equity over the
// scored base set plus pins minus removals. The snapshot is never modified.
nlohmann::ordered_json evaluate_whatif(const Scenario& scenario, const Engine& engine);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class Service {
 public:
  Service(std::shared_ptr<const Engine> engine, Month default_month, std::size_t capacity = 100);

  // Thread-safe. `query` is the raw query string without '?'.
  HttpResponse handle(std::string_view method, std::string_view path, std::string_view query,
                      std::string_view body);

  std::size_t scenario_count() const;

 private:
  struct Entry {
    Scenario scenario;
    std::optional<std::string> evaluation;  // cached evaluate payload
    std::mutex mutex;
  };

  HttpResponse summary() const;
  HttpResponse stations(const Month& month) const;
  HttpResponse zones() const;
  HttpResponse create_scenario(std::string_view body);
  HttpResponse update_candidates(const std::string& id, std::string_view body);
  HttpResponse evaluate(const std::string& id);
  HttpResponse delete_scenario(const std::string& id);
  HttpResponse recommend(std::string_view body) const;

  std::shared_ptr<Entry> find(const std::string& id) const;

  std::shared_ptr<const Engine> engine_;
  Month default_month_;
  std::size_t capacity_;
  mutable std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> scenarios_;
  int next_id_ = 1;
};

}  // namespace bikeaccess
