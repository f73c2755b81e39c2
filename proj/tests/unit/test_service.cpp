#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "bikeaccess/error.hpp"
#include "bikeaccess/service.hpp"
#include "bikeaccess/synthetic.hpp"

using namespace bikeaccess;
using json = nlohmann::json;

namespace {

synthetic::GridCityOptions small_grid() {
  synthetic::GridCityOptions o;
  o.size = 12;
  return o;
}

const ModelParams& small_model() {
  static const ModelParams model = [] {
    const CitySnapshot snap = assemble_snapshot(synthetic::equity_grid_city(small_grid()));
    const ModelContext ctx(snap);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.hidden = 4;
    cfg.neighbors = 3;
    return train(cfg, ctx, collect_labels(snap)).params;
  }();
  return model;
}

std::shared_ptr<const Engine> grid_engine() {
  static const auto engine = std::make_shared<const Engine>(
      assemble_snapshot(synthetic::equity_grid_city(small_grid())), std::nullopt, small_model());
  return engine;
}

json call(Service& svc, std::string_view method, std::string_view path, std::string_view body = "",
          int expect = 200, std::string_view query = "") {
  const HttpResponse r = svc.handle(method, path, query, body);
  CHECK_MESSAGE(r.status == expect, r.body);
  return json::parse(r.body);
}

}  // namespace

TEST_CASE("pin ids") {
  CHECK(pin_id_for(GeoPoint{-73.95, 40.7}) == "pin_-73950000_40700000");
  CHECK(pin_id_for(GeoPoint{-73.9500001, 40.7}) == pin_id_for(GeoPoint{-73.95, 40.7}));
}

TEST_CASE("what-if evaluation") {
  const auto engine = grid_engine();
  const Month month = synthetic::grid_month();
  const auto& nodes = engine->snapshot().network.nodes();

  SUBCASE("empty scenario leaves equity unchanged") {
    Scenario s{"empty", month, {}, {}};
    const auto j = evaluate_whatif(s, *engine);
    CHECK(j["equity_before"] == j["equity_after"]);
    CHECK(j["gini_delta"]["income"].get<double>() == 0.0);
    CHECK(j["gini_delta"]["ethnicity"].get<double>() == 0.0);
  }

  SUBCASE("swapping a station for a pin at the same spot preserves every group mean") {
    const Station* s0 = engine->snapshot().find_station("s000");
    REQUIRE(s0 != nullptr);
    Scenario s{"swap", month, {{pin_id_for(s0->location), s0->location}}, {"s000"}};
    const auto j = evaluate_whatif(s, *engine);
    REQUIRE(j["candidates"][0]["ok"] == true);
    for (int v = 0; v < 2; ++v) {
      for (int g = 0; g < 4; ++g) {
        CHECK(std::abs(j["equity_after"]["variables"][v]["groups"][g]["mean_wptal"].get<double>() -
                       j["equity_before"]["variables"][v]["groups"][g]["mean_wptal"].get<double>()) <= 1e-12);
      }
    }
    CHECK(std::abs(j["gini_delta"]["income"].get<double>()) <= 1e-12);
    CHECK(std::abs(j["gini_delta"]["ethnicity"].get<double>()) <= 1e-12);
    CHECK(j["removed"][0]["found"] == true);
  }

  SUBCASE("unsnappable pin is reported and the rest still evaluates") {
    const GeoPoint far{nodes[0].lon - 0.2, nodes[0].lat};
    Scenario s{"far", month, {{pin_id_for(far), far}, {pin_id_for(nodes[5]), nodes[5]}}, {}};
    const auto j = evaluate_whatif(s, *engine);
    REQUIRE(j["candidates"].size() == 2);
    int ok = 0;
    for (const auto& c : j["candidates"]) ok += c["ok"].get<bool>() ? 1 : 0;
    CHECK(ok == 1);
  }

  SUBCASE("matches a rebuilt snapshot with the edits applied") {
    const GeoPoint a = nodes[14];
    const GeoPoint b = nodes[100];
    Scenario s{"offline", month, {{pin_id_for(a), a}, {pin_id_for(b), b}}, {"s001"}};
    const auto j = evaluate_whatif(s, *engine);

    SnapshotParts parts = synthetic::equity_grid_city(small_grid());
    std::erase_if(parts.stations, [](const Station& st) { return st.station_id == "s001"; });
    for (const GeoPoint& p : {a, b}) {
      Station st;
      st.station_id = pin_id_for(p);
      st.location = p;
      st.status = StationStatus::cold_start;
      st.open_month = month;
      parts.stations.push_back(st);
    }
    const Engine edited(assemble_snapshot(parts), std::nullopt, small_model());
    const json offline = to_json(edited.equity(month, {}));
    CHECK_MESSAGE(offline == j["equity_after"], offline.dump() << "\n" << j["equity_after"].dump());
    for (const auto& c : j["candidates"]) {
      const auto& batch = edited.scores(month).scores;
      const auto it = std::find_if(batch.begin(), batch.end(),
                                   [&](const AccessScore& x) { return x.station_id == c["candidate_id"]; });
      REQUIRE(it != batch.end());
      CHECK(std::abs(it->wptal - c["wptal"].get<double>()) <= 1e-9);
    }
  }
}

TEST_CASE("http routes") {
  Service svc(grid_engine(), synthetic::grid_month(), 3);

  const auto summary = call(svc, "GET", "/api/snapshot/summary");
  CHECK(summary["counts"]["zones"] == 4);
  CHECK(summary["bbox"].size() == 4);
  CHECK(summary["has_model"] == true);

  const auto stations = call(svc, "GET", "/api/stations", "", 200, "month=2024-06");
  CHECK(stations["stations"].size() == grid_engine()->scores(synthetic::grid_month()).scores.size());
  CHECK(stations["wptal_breaks"].size() == 3);
  CHECK(call(svc, "GET", "/api/zones")["zones"].size() == 4);

  const HttpResponse csv = svc.handle("GET", "/api/score", "", "");
  CHECK(csv.content_type == "text/csv");
  CHECK(csv.body == grid_engine()->wptal_csv(synthetic::grid_month()));

  const auto rec = call(svc, "POST", "/api/recommend", R"({"n": 2})");
  CHECK(rec["recommendations"].size() <= 2);
  CHECK(rec["schema_version"] == kSchemaVersion);

  call(svc, "GET", "/api/nothing", "", 404);
  call(svc, "POST", "/api/recommend", "{not json", 400);
  call(svc, "POST", "/api/recommend", R"({"n": -1})", 400);
  call(svc, "GET", "/api/stations", "", 400, "month=2024-13");
  const auto missing = call(svc, "GET", "/api/scenario/nope/evaluate", "", 404);
  CHECK(missing["error"]["code"].is_string());

  SUBCASE("scenario lifecycle") {
    const auto created = call(svc, "POST", "/api/scenario", R"({"scenario_id": "mine"})", 201);
    CHECK(created["scenario_id"] == "mine");
    call(svc, "POST", "/api/scenario", R"({"scenario_id": "mine"})", 200);
    CHECK(svc.scenario_count() == 1);

    const auto& node = grid_engine()->snapshot().network.nodes()[20];
    const std::string pin = json::array({node.lon, node.lat}).dump();
    call(svc, "PUT", "/api/scenario/mine/candidates", R"({"add": [)" + pin + "]}");
    const auto twice = call(svc, "PUT", "/api/scenario/mine/candidates", R"({"add": [)" + pin + "]}");
    CHECK(twice["added_candidates"].size() == 1);

    const auto eval = call(svc, "GET", "/api/scenario/mine/evaluate");
    CHECK(eval["candidates"].size() == 1);
    CHECK(call(svc, "GET", "/api/scenario/mine/evaluate") == eval);

    const std::string id = twice["added_candidates"][0]["candidate_id"];
    call(svc, "PUT", "/api/scenario/mine/candidates", R"({"remove": [")" + id + R"("]})");
    const auto back = call(svc, "GET", "/api/scenario/mine/evaluate");
    CHECK(back["candidates"].empty());
    CHECK(back["equity_after"] == back["equity_before"]);

    call(svc, "PUT", "/api/scenario/mine/candidates", R"({"add": [[1, 2, 3]]})", 400);
    call(svc, "DELETE", "/api/scenario/mine");
    call(svc, "DELETE", "/api/scenario/mine", "", 404);
  }

  SUBCASE("capacity") {
    call(svc, "POST", "/api/scenario", "", 201);
    call(svc, "POST", "/api/scenario", "", 201);
    call(svc, "POST", "/api/scenario", "", 201);
    call(svc, "POST", "/api/scenario", "", 409);
  }
}

TEST_CASE("service without a model") {
  auto engine = std::make_shared<const Engine>(assemble_snapshot(synthetic::equity_grid_city(small_grid())),
                                               std::nullopt, std::nullopt);
  Service svc(engine, synthetic::grid_month());
  CHECK(call(svc, "GET", "/api/snapshot/summary")["has_model"] == false);
  call(svc, "GET", "/api/stations", "", 503);
  CHECK(!engine->ptal_csv(synthetic::grid_month()).empty());
}
