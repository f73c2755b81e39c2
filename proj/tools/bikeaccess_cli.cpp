// Command-line front end. Talks to the engine only through bikeaccess.h.

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <httplib.h>

#include "bikeaccess.h"

namespace fs = std::filesystem;

namespace {

// Order matches the walkable_mask bits in bikeaccess.h.
constexpr const char* kRoadClassNames[] = {"motorway",     "trunk",       "primary",     "secondary",
                                           "tertiary",     "unclassified", "residential", "living_street"};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(ba_status s) {
  if (s != BA_OK) throw Failure(std::string(ba_status_name(s)) + ": " + ba_last_error());
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { ba_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct EngineHandle {
  ba_engine* p = nullptr;
  ~EngineHandle() { ba_engine_close(p); }
};

struct ServiceHandle {
  ba_service* p = nullptr;
  ~ServiceHandle() { ba_service_destroy(p); }
};

// "section.key" -> value. Config values first, flags overwrite.
using Settings = std::map<std::string, std::string>;

const char* kPathKeys[] = {"paths.dir",       "paths.network", "paths.stations",   "paths.demand",
                           "paths.entrances", "paths.schedules", "paths.zones",    "paths.pois",
                           "paths.embeddings", "paths.model"};

Settings read_config(const fs::path& file) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Failure(std::string("config: ") + e.what());
  }
  Settings out;
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) out[section + "." + key] = value.data();
  }
  // Relative paths in the config resolve against the config file's directory.
  const fs::path base = file.parent_path();
  for (const char* key : kPathKeys) {
    auto it = out.find(key);
    if (it != out.end() && !it->second.empty() && fs::path(it->second).is_relative()) {
      it->second = (base / it->second).lexically_normal().string();
    }
  }
  return out;
}

std::optional<std::string> get(const Settings& s, const std::string& key) {
  const auto it = s.find(key);
  if (it == s.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::string require_key(const Settings& s, const std::string& key, const std::string& flag) {
  auto v = get(s, key);
  if (!v) throw Failure("missing " + key + " (config) or " + flag + " (flag)");
  return *v;
}

double to_double(const Settings& s, const std::string& key, double fallback) {
  auto v = get(s, key);
  if (!v) return fallback;
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(*v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v->size()) throw Failure(key + ": not a number: '" + *v + "'");
  return out;
}

long long to_int(const Settings& s, const std::string& key, long long fallback) {
  auto v = get(s, key);
  if (!v) return fallback;
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(*v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v->size()) throw Failure(key + ": not an integer: '" + *v + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Keeps the path strings alive for the C struct.
struct Paths {
  std::vector<std::string> storage;
  ba_input_paths c{};
};

Paths input_paths(const Settings& s) {
  Paths p;
  std::vector<std::string> names(7);
  if (auto dir = get(s, "paths.dir")) {
    ba_input_paths d{};
    check(ba_input_paths_in_directory(dir->c_str(), &d));
    names = {d.network, d.stations, d.demand, d.entrances, d.schedules, d.zones, d.pois};
  }
  const char* keys[] = {"network", "stations", "demand", "entrances", "schedules", "zones", "pois"};
  for (int i = 0; i < 7; ++i) {
    if (auto v = get(s, std::string("paths.") + keys[i])) names[i] = *v;
  }
  p.storage = std::move(names);
  auto c = [&](int i) { return p.storage[i].c_str(); };
  p.c = ba_input_paths{c(0), c(1), c(2), c(3), c(4), c(5), c(6)};
  return p;
}

ba_access_params access_params(const Settings& s) {
  ba_access_params a;
  ba_access_params_default(&a);
  a.window_start_min = to_double(s, "access.window_start", a.window_start_min);
  a.window_end_min = to_double(s, "access.window_end", a.window_end_min);
  a.reliability_buffer_min = to_double(s, "access.reliability_buffer", a.reliability_buffer_min);
  a.edf_numerator = to_double(s, "access.edf_numerator", a.edf_numerator);
  a.secondary_weight = to_double(s, "access.secondary_weight", a.secondary_weight);
  a.entrance_radius_m = to_double(s, "access.entrance_radius", a.entrance_radius_m);
  return a;
}

ba_placement_params placement_params(const Settings& s) {
  ba_placement_params p;
  ba_placement_params_default(&p);
  p.min_spacing_m = to_double(s, "placement.min_spacing_m", p.min_spacing_m);
  if (auto w = get(s, "placement.walkable")) {
    p.walkable_mask = 0;
    for (const std::string& name : split_list(*w)) {
      const auto* end = std::end(kRoadClassNames);
      const auto* it = std::find(std::begin(kRoadClassNames), end, name);
      if (it == end) throw Failure("placement.walkable: unknown road class '" + name + "'");
      p.walkable_mask |= 1u << static_cast<unsigned>(it - std::begin(kRoadClassNames));
    }
  }
  if (auto f = get(s, "placement.equity_filter")) {
    if (*f == "or") {
      p.require_both = 0;
    } else if (*f == "and") {
      p.require_both = 1;
    } else {
      throw Failure("placement.equity_filter must be 'or' or 'and'");
    }
  }
  return p;
}

ba_train_config train_config(const Settings& s) {
  ba_train_config c;
  ba_train_config_default(&c);
  c.epochs = static_cast<int>(to_int(s, "train.epochs", c.epochs));
  c.learning_rate = to_double(s, "train.learning_rate", c.learning_rate);
  c.seed = static_cast<uint64_t>(to_int(s, "train.seed", static_cast<long long>(c.seed)));
  c.hidden = static_cast<int>(to_int(s, "train.hidden", c.hidden));
  c.neighbors = static_cast<int>(to_int(s, "train.neighbors", c.neighbors));
  return c;
}

void emit(const Settings& s, const std::string& text) {
  if (auto out = get(s, "run.output")) {
    std::ofstream f(*out, std::ios::binary);
    if (!f) throw Failure("cannot open output file '" + *out + "'");
    f << text;
    if (!f) throw Failure("write failed: '" + *out + "'");
  } else {
    std::cout << text;
  }
}

void print_warnings(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) std::cerr << "warning: " << line << "\n";
  }
}

void open_engine(const Settings& s, bool need_model, EngineHandle& engine) {
  Paths paths = input_paths(s);
  const ba_access_params access = access_params(s);
  const ba_placement_params placement = placement_params(s);
  const auto embeddings = get(s, "paths.embeddings");
  std::optional<std::string> model = get(s, "paths.model");
  if (need_model && !model) throw Failure("missing paths.model (config) or --model (flag)");
  check(ba_engine_open(&paths.c, embeddings ? embeddings->c_str() : nullptr, model ? model->c_str() : nullptr, &access,
                       &placement, &engine.p));
}

void flush_warnings(EngineHandle& engine) {
  OwnedString w;
  if (ba_engine_take_warnings(engine.p, &w.p) == BA_OK) print_warnings(w.str());
}

using EngineFn = ba_status (*)(ba_engine*, const char*, char**);

void run_month_csv(const Settings& s, bool need_model, EngineFn fn) {
  EngineHandle engine;
  open_engine(s, need_model, engine);
  const std::string month = require_key(s, "run.month", "--month");
  OwnedString out;
  const ba_status st = fn(engine.p, month.c_str(), &out.p);
  flush_warnings(engine);
  check(st);
  emit(s, out.str());
}

void cmd_ingest(const Settings& s) {
  Paths paths = input_paths(s);
  const std::string out_dir = require_key(s, "run.out_dir", "--out-dir");
  fs::create_directories(out_dir);
  OwnedString report;
  check(ba_ingest(&paths.c, out_dir.c_str(), &report.p));
  emit(s, report.str());
}

void cmd_train(const Settings& s) {
  Paths paths = input_paths(s);
  const ba_train_config cfg = train_config(s);
  const std::string model_out = require_key(s, "paths.model", "--model");
  const auto embeddings = get(s, "paths.embeddings");
  OwnedString loss;
  check(ba_train(&paths.c, embeddings ? embeddings->c_str() : nullptr, &cfg, model_out.c_str(), &loss.p));
  emit(s, loss.str());
}

void cmd_equity(const Settings& s) {
  EngineHandle engine;
  open_engine(s, true, engine);
  const std::string month = require_key(s, "run.month", "--month");
  const auto with = get(s, "run.with");
  OwnedString out;
  const ba_status st = ba_engine_equity_json(engine.p, month.c_str(), with ? with->c_str() : nullptr, &out.p);
  flush_warnings(engine);
  check(st);
  emit(s, out.str());
}

void cmd_recommend(const Settings& s) {
  EngineHandle engine;
  open_engine(s, true, engine);
  const std::string month = require_key(s, "run.month", "--month");
  const int n = static_cast<int>(to_int(s, "run.n", 10));
  const std::string format = get(s, "run.format").value_or("csv");
  if (format != "csv" && format != "json") throw Failure("--format must be csv or json");
  OwnedString out;
  const ba_status st = ba_engine_recommend(engine.p, month.c_str(), n, format == "json", &out.p);
  flush_warnings(engine);
  check(st);
  emit(s, out.str());
}

void cmd_curve(const Settings& s) {
  EngineHandle engine;
  open_engine(s, true, engine);
  const std::string month = require_key(s, "run.month", "--month");
  std::vector<int> increments;
  for (const std::string& item : split_list(get(s, "run.increments").value_or("0,5,10,20"))) {
    Settings one{{"x", item}};
    increments.push_back(static_cast<int>(to_int(one, "x", 0)));
  }
  OwnedString out;
  const ba_status st = ba_engine_curve_json(engine.p, month.c_str(), increments.data(), increments.size(), &out.p);
  flush_warnings(engine);
  check(st);
  emit(s, out.str());
}

void cmd_synth(const Settings& s) {
  const std::string kind = get(s, "run.kind").value_or("grid");
  const std::string out_dir = require_key(s, "run.out_dir", "--out-dir");
  const auto seed = static_cast<uint64_t>(to_int(s, "run.seed", kind == "grid" ? 7 : 11));
  check(ba_synthesize(kind.c_str(), seed, out_dir.c_str()));
  std::cerr << "wrote " << kind << " city to " << out_dir << "\n";
}

httplib::Server* g_server = nullptr;

void cmd_serve(const Settings& s) {
  EngineHandle engine;
  open_engine(s, true, engine);
  const std::string month = require_key(s, "run.month", "--month");
  ServiceHandle service;
  check(ba_service_create(engine.p, month.c_str(), static_cast<size_t>(to_int(s, "serve.capacity", 100)), &service.p));
  flush_warnings(engine);

  httplib::Server server;
  auto route = [&](const httplib::Request& req, httplib::Response& res) {
    const auto q = req.target.find('?');
    const std::string query = q == std::string::npos ? "" : req.target.substr(q + 1);
    int status = 500;
    const char* type = "application/json";
    OwnedString body;
    const ba_status st = ba_service_handle(service.p, req.method.c_str(), req.path.c_str(), query.c_str(),
                                           req.body.data(), req.body.size(), &status, &type, &body.p);
    if (st != BA_OK) {
      res.status = 500;
      res.set_content(std::string("{\"error\": \"") + ba_last_error() + "\"}\n", "application/json");
      return;
    }
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.str(), type);
  };
  server.Get(R"(/api/.*)", route);
  server.Post(R"(/api/.*)", route);
  server.Put(R"(/api/.*)", route);
  server.Delete(R"(/api/.*)", route);
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  const std::string host = get(s, "serve.host").value_or("127.0.0.1");
  const int port = static_cast<int>(to_int(s, "serve.port", 8080));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "listening on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Failure("cannot listen on " + host + ":" + std::to_string(port));
  g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bike-to-subway accessibility, demand, equity and placement tools"};
  app.require_subcommand(1);
  std::string config_file;
  Settings flags;

  auto flag = [&](CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  auto with_inputs = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
    flag(cmd, "--data-dir", "paths.dir", "directory holding the conventional input files");
    flag(cmd, "--network", "paths.network", "network.geojson");
    flag(cmd, "--stations", "paths.stations", "stations.csv");
    flag(cmd, "--demand", "paths.demand", "demand.csv");
    flag(cmd, "--entrances", "paths.entrances", "entrances.csv");
    flag(cmd, "--schedules", "paths.schedules", "schedules.csv");
    flag(cmd, "--zones", "paths.zones", "zones.geojson");
    flag(cmd, "--pois", "paths.pois", "pois.csv");
    flag(cmd, "--embeddings", "paths.embeddings", "embeddings.csv (station_id,e0,...)");
    flag(cmd, "-o,--output", "run.output", "write output here instead of stdout");
  };
  auto with_access = [&](CLI::App* cmd) {
    flag(cmd, "--month", "run.month", "target month YYYY-MM");
    flag(cmd, "--window-start", "access.window_start", "service window start, minutes past midnight");
    flag(cmd, "--window-end", "access.window_end", "service window end, minutes past midnight");
    flag(cmd, "--reliability-buffer", "access.reliability_buffer", "minutes added to every trip");
    flag(cmd, "--edf-numerator", "access.edf_numerator", "EDF numerator, minutes");
    flag(cmd, "--secondary-weight", "access.secondary_weight", "weight of non-best EDFs");
    flag(cmd, "--entrance-radius", "access.entrance_radius", "metres");
  };
  auto with_model = [&](CLI::App* cmd) { flag(cmd, "--model", "paths.model", "trained model file"); };
  auto with_placement = [&](CLI::App* cmd) {
    flag(cmd, "--min-spacing", "placement.min_spacing_m", "metres between stations");
    flag(cmd, "--walkable", "placement.walkable", "comma-separated road classes");
    flag(cmd, "--equity-filter", "placement.equity_filter", "or | and");
  };

  auto* ingest = app.add_subcommand("ingest", "validate inputs and write a normalized snapshot");
  with_inputs(ingest);
  flag(ingest, "--out-dir", "run.out_dir", "directory for the normalized snapshot");

  auto* ptal = app.add_subcommand("ptal", "PTAL of cold-start and candidate stations (CSV)");
  with_inputs(ptal);
  with_access(ptal);

  auto* train = app.add_subcommand("demand-train", "train the demand model; prints epoch,loss CSV");
  with_inputs(train);
  flag(train, "--model", "paths.model", "where to save the model");
  flag(train, "--epochs", "train.epochs", "full-batch epochs");
  flag(train, "--lr", "train.learning_rate", "Adam learning rate");
  flag(train, "--seed", "train.seed", "initialization seed");
  flag(train, "--hidden", "train.hidden", "hidden width");
  flag(train, "--neighbors", "train.neighbors", "neighbors per local graph");

  auto* predict = app.add_subcommand("demand-predict", "predicted trips for cold-start and candidate stations (CSV)");
  with_inputs(predict);
  with_access(predict);
  with_model(predict);

  auto* wptal = app.add_subcommand("wptal", "PTAL x predicted demand (CSV)");
  with_inputs(wptal);
  with_access(wptal);
  with_model(wptal);

  auto* equity = app.add_subcommand("equity", "group Gini report (JSON)");
  with_inputs(equity);
  with_access(equity);
  with_model(equity);
  flag(equity, "--with", "run.with", "recommendations.csv whose rows join the equity set");

  auto* rec = app.add_subcommand("recommend", "greedy station recommendations");
  with_inputs(rec);
  with_access(rec);
  with_model(rec);
  with_placement(rec);
  flag(rec, "-n,--count", "run.n", "number of stations");
  flag(rec, "--format", "run.format", "csv | json");

  auto* curve = app.add_subcommand("curve", "equity after each increment of recommendations (JSON)");
  with_inputs(curve);
  with_access(curve);
  with_model(curve);
  with_placement(curve);
  flag(curve, "--increments", "run.increments", "comma-separated counts, ascending");

  auto* serve = app.add_subcommand("serve", "HTTP API");
  with_inputs(serve);
  with_access(serve);
  with_model(serve);
  with_placement(serve);
  flag(serve, "--host", "serve.host", "bind address");
  flag(serve, "--port", "serve.port", "port");
  flag(serve, "--capacity", "serve.capacity", "maximum live scenarios");

  auto* synth = app.add_subcommand("synth", "write a synthetic city (grid | linear)");
  flag(synth, "--kind", "run.kind", "grid | linear");
  flag(synth, "--out-dir", "run.out_dir", "output directory");
  flag(synth, "--seed", "run.seed", "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    Settings s = config_file.empty() ? Settings{} : read_config(config_file);
    for (const auto& [k, v] : flags) s[k] = v;

    if (ingest->parsed()) cmd_ingest(s);
    if (ptal->parsed()) run_month_csv(s, false, ba_engine_ptal_csv);
    if (train->parsed()) cmd_train(s);
    if (predict->parsed()) run_month_csv(s, true, ba_engine_predict_csv);
    if (wptal->parsed()) run_month_csv(s, true, ba_engine_wptal_csv);
    if (equity->parsed()) cmd_equity(s);
    if (rec->parsed()) cmd_recommend(s);
    if (curve->parsed()) cmd_curve(s);
    if (serve->parsed()) cmd_serve(s);
    if (synth->parsed()) cmd_synth(s);
  } catch (const Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
