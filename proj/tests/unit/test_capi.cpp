#include <doctest.h>

#include <cstring>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "bikeaccess.h"
#include "bikeaccess/engine.hpp"
#include "support/toy_city.hpp"

namespace {

// Owns a string returned by the library.
std::string take(char* s) {
  std::unique_ptr<char, decltype(&ba_string_free)> guard(s, &ba_string_free);
  return s ? std::string(s) : std::string();
}

struct City {
  std::filesystem::path dir;
  std::filesystem::path model;
};

const City& trained_city() {
  static const City city = [] {
    City c;
    c.dir = toy::temp_dir("capi");
    REQUIRE(ba_synthesize("grid", 7, c.dir.string().c_str()) == BA_OK);
    ba_input_paths paths;
    REQUIRE(ba_input_paths_in_directory(c.dir.string().c_str(), &paths) == BA_OK);
    ba_train_config cfg;
    ba_train_config_default(&cfg);
    cfg.epochs = 5;
    cfg.hidden = 4;
    c.model = c.dir / "model.txt";
    char* loss = nullptr;
    REQUIRE(ba_train(&paths, nullptr, &cfg, c.model.string().c_str(), &loss) == BA_OK);
    const std::string csv = take(loss);
    CHECK(csv.rfind("epoch,loss\n0,", 0) == 0);
    return c;
  }();
  return city;
}

}  // namespace

TEST_CASE("status names and defaults") {
  CHECK(std::strcmp(ba_status_name(BA_OK), "ok") == 0);
  CHECK(std::strcmp(ba_status_name(BA_ERR_CAPACITY), "capacity") == 0);
  CHECK(std::strlen(ba_status_name(static_cast<ba_status>(1234))) > 0);

  ba_access_params a;
  ba_access_params_default(&a);
  CHECK(a.window_start_min == 450.0);
  CHECK(a.window_end_min == 570.0);
  CHECK(a.entrance_radius_m == 500.0);
  ba_placement_params p;
  ba_placement_params_default(&p);
  CHECK(p.min_spacing_m == 305.0);
  CHECK(p.walkable_mask == 216u);
  ba_train_config t;
  ba_train_config_default(&t);
  CHECK(t.epochs == 200);
  CHECK(t.neighbors == 5);
}

TEST_CASE("errors carry a code and a message") {
  ba_input_paths paths;
  const auto missing = toy::temp_dir("capi_missing") / "nothing";
  REQUIRE(ba_input_paths_in_directory(missing.string().c_str(), &paths) == BA_OK);
  ba_engine* engine = nullptr;
  CHECK(ba_engine_open(&paths, nullptr, nullptr, nullptr, nullptr, &engine) == BA_ERR_IO);
  CHECK(engine == nullptr);
  CHECK(std::strlen(ba_last_error()) > 0);

  CHECK(ba_engine_open(nullptr, nullptr, nullptr, nullptr, nullptr, &engine) == BA_ERR_INVALID_ARGUMENT);
  CHECK(ba_synthesize("moon", 1, missing.string().c_str()) == BA_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ba_last_error()).find("moon") != std::string::npos);
}

TEST_CASE("engine round trip") {
  const City& city = trained_city();
  ba_input_paths paths;
  REQUIRE(ba_input_paths_in_directory(city.dir.string().c_str(), &paths) == BA_OK);

  char* report = nullptr;
  const auto normalized = toy::temp_dir("capi_ingest");
  REQUIRE(ba_ingest(&paths, normalized.string().c_str(), &report) == BA_OK);
  const auto ingest = nlohmann::json::parse(take(report));
  CHECK(ingest["schema_version"] == 1);

  ba_engine* engine = nullptr;
  REQUIRE(ba_engine_open(&paths, nullptr, city.model.string().c_str(), nullptr, nullptr, &engine) == BA_OK);
  const auto reference = bikeaccess::Engine::load(bikeaccess::InputPaths::in_directory(city.dir), std::nullopt,
                                                  city.model);
  const bikeaccess::Month month{2024, 6};

  char* out = nullptr;
  REQUIRE(ba_engine_wptal_csv(engine, "2024-06", &out) == BA_OK);
  CHECK(take(out) == reference->wptal_csv(month));
  REQUIRE(ba_engine_ptal_csv(engine, "2024-06", &out) == BA_OK);
  CHECK(take(out) == reference->ptal_csv(month));
  REQUIRE(ba_engine_predict_csv(engine, "2024-06", &out) == BA_OK);
  CHECK(take(out) == reference->predict_csv(month));
  REQUIRE(ba_engine_recommend(engine, "2024-06", 3, 0, &out) == BA_OK);
  const std::string rec_csv = take(out);
  CHECK(rec_csv == reference->recommend_csv(month, 3));
  REQUIRE(ba_engine_recommend(engine, "2024-06", 3, 1, &out) == BA_OK);
  CHECK(take(out) == reference->recommend_json(month, 3));

  REQUIRE(ba_engine_equity_json(engine, "2024-06", nullptr, &out) == BA_OK);
  const auto before = nlohmann::json::parse(take(out));
  CHECK(before["n_additions"] == 0);
  const auto recs_path = city.dir / "recs.csv";
  toy::write(recs_path, rec_csv);
  REQUIRE(ba_engine_equity_json(engine, "2024-06", recs_path.string().c_str(), &out) == BA_OK);
  CHECK(nlohmann::json::parse(take(out))["n_additions"] == std::count(rec_csv.begin(), rec_csv.end(), '\n') - 1);

  const int incs[] = {0, 2};
  REQUIRE(ba_engine_curve_json(engine, "2024-06", incs, 2, &out) == BA_OK);
  CHECK(nlohmann::json::parse(take(out))["increments"].contains("2"));

  CHECK(ba_engine_wptal_csv(engine, "June", &out) == BA_ERR_INVALID_ARGUMENT);
  CHECK(ba_engine_recommend(engine, "2024-06", -1, 0, &out) == BA_ERR_INVALID_ARGUMENT);
  const int bad[] = {3, 1};
  CHECK(ba_engine_curve_json(engine, "2024-06", bad, 2, &out) == BA_ERR_INVALID_ARGUMENT);
  REQUIRE(ba_engine_take_warnings(engine, &out) == BA_OK);
  take(out);

  ba_service* service = nullptr;
  REQUIRE(ba_service_create(engine, "2024-06", 4, &service) == BA_OK);
  ba_engine_close(engine);  // the service keeps its own reference

  int status = 0;
  const char* type = nullptr;
  REQUIRE(ba_service_handle(service, "GET", "/api/snapshot/summary", "", "", 0, &status, &type, &out) == BA_OK);
  CHECK(status == 200);
  CHECK(std::string(type) == "application/json");
  CHECK(nlohmann::json::parse(take(out))["has_model"] == true);
  const std::string body = R"({"n": 2})";
  REQUIRE(ba_service_handle(service, "POST", "/api/recommend", "", body.data(), body.size(), &status, &type, &out) ==
          BA_OK);
  CHECK(status == 200);
  take(out);
  REQUIRE(ba_service_handle(service, "GET", "/api/missing", "", "", 0, &status, &type, &out) == BA_OK);
  CHECK(status == 404);
  take(out);
  ba_service_destroy(service);
}

TEST_CASE("engine without a model") {
  const City& city = trained_city();
  ba_input_paths paths;
  REQUIRE(ba_input_paths_in_directory(city.dir.string().c_str(), &paths) == BA_OK);
  ba_engine* engine = nullptr;
  REQUIRE(ba_engine_open(&paths, nullptr, nullptr, nullptr, nullptr, &engine) == BA_OK);
  char* out = nullptr;
  CHECK(ba_engine_ptal_csv(engine, "2024-06", &out) == BA_OK);
  take(out);
  CHECK(ba_engine_wptal_csv(engine, "2024-06", &out) == BA_ERR_MODEL);
  CHECK(std::string(ba_last_error()).find("model") != std::string::npos);

  ba_access_params bad;
  ba_access_params_default(&bad);
  bad.reliability_buffer_min = 0;
  ba_engine* other = nullptr;
  CHECK(ba_engine_open(&paths, nullptr, nullptr, &bad, nullptr, &other) == BA_ERR_INVALID_ARGUMENT);
  ba_engine_close(engine);
}
