#include "mixlr/service.hpp"

#include <cstdio>

#include "httplib.h"
#include "mixlr/error.hpp"
#include "mixlr/serialization.hpp"

namespace mixlr {

namespace {

using Json = io::Json;

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  Json j;
  j["error"] = {{"code", code}, {"message", message}};
  return {status, j.dump()};
}

LabelSet fluid_set(const Json& j, const char* field) {
  if (j.is_string()) return LabelSet::parse(j.get<std::string>());
  if (!j.is_array()) throw DataError(std::string("'") + field + "' must be a list of fluids");
  LabelSet s;
  for (const auto& f : j) {
    if (!f.is_string()) throw DataError(std::string("'") + field + "' must contain fluid names");
    s.insert(parse_fluid(f.get<std::string>()));
  }
  return s;
}

Json variant_metadata(const LrSystem& s) {
  Json j;
  j["variant_id"] = s.variant_id();
  j["strategy"] = std::string(to_string(s.spec.strategy));
  j["dichotomization"] = std::string(to_string(s.spec.mode));
  Json sets = Json::array();
  for (const auto& [set, c] : s.calibrators) sets.push_back(set.to_string());
  j["interest_sets"] = sets;
  j["background"] = io::to_json(s.spec.background);
  j["training_seed"] = s.spec.training.seed;
  j["lambda"] = s.spec.training.lambda;
  return j;
}

}  // namespace

Service::Service(std::shared_ptr<ModelStore> store, CaseOptions options)
    : store_(std::move(store)), options_(std::move(options)) {}

HttpResponse Service::evaluate(std::string_view body) const {
  try {
    const Json req = io::parse(body);
    if (!req.is_object()) throw DataError("request body must be a JSON object");
    for (const auto& [key, value] : req.items()) {
      if (key != "interest" && key != "case" && key != "background" && key != "fixed_present" &&
          key != "fixed_absent" && key != "variant_id")
        throw DataError("unknown request field '" + key + "'");
    }
    if (!req.contains("interest")) throw DataError("missing field 'interest'");
    if (!req.contains("case")) throw DataError("missing field 'case'");

    HypothesisPair hp;
    hp.interest = fluid_set(req.at("interest"), "interest");
    if (req.contains("fixed_present")) hp.fixed_present = fluid_set(req.at("fixed_present"), "fixed_present");
    if (req.contains("fixed_absent")) hp.fixed_absent = fluid_set(req.at("fixed_absent"), "fixed_absent");
    hp.validate();

    std::shared_ptr<const LrSystem> system;
    if (req.contains("variant_id") && !req.at("variant_id").is_null()) {
      if (!req.at("variant_id").is_string()) throw DataError("'variant_id' must be a string");
      const auto id = req.at("variant_id").get<std::string>();
      system = store_->find(id);
      if (!system) return error_response(404, "unknown_variant", "no model variant '" + id + "'");
    } else {
      BackgroundLevels bg;
      if (req.contains("background")) bg = io::background_from_json(req.at("background"));
      try {
        system = store_->obtain(hp.interest, hp.apply(bg));
      } catch (const VariantNotFound& e) {
        return error_response(409, "variant_unavailable", std::string(e.what()) + " and on-demand training is disabled");
      }
    }
    const auto obs = io::case_from_json(req.at("case"), system->panel);
    const auto report = evaluate_case(*system, obs, hp, options_);

    Json out;
    out["report"] = io::to_json(report);
    out["variant"] = variant_metadata(*system);
    out["server_version"] = kServerVersion;
    return {200, out.dump()};
  } catch (const DataError& e) {
    return error_response(400, "invalid_request", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, "invalid_request", e.what());
  } catch (const NumericError& e) {
    return error_response(500, "numeric_failure", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }
}

HttpResponse Service::models() const {
  Json list = Json::array();
  for (const auto& s : store_->list()) {
    Json entry = variant_metadata(*s);
    const Json doc = io::to_json(*s);
    if (doc.contains("classifiers")) entry["classifiers"] = doc.at("classifiers");
    if (doc.contains("powerset")) entry["powerset"] = doc.at("powerset");
    entry["calibrators"] = doc.at("calibrators");
    list.push_back(entry);
  }
  Json out;
  out["models"] = list;
  out["server_version"] = kServerVersion;
  return {200, out.dump()};
}

HttpResponse Service::panel() const {
  const auto p = MarkerPanel::standard();
  Json out = io::to_json(p);
  Json fluids = Json::array();
  for (auto f : kAllFluids) fluids.push_back(std::string(to_string(f)));
  out["fluids"] = fluids;
  out["server_version"] = kServerVersion;
  return {200, out.dump()};
}

HttpServer::HttpServer(std::shared_ptr<Service> service, const std::string& static_dir)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Post("/api/v1/evaluate", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_->evaluate(req.body));
  });
  server_->Get("/api/v1/models", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service_->models());
  });
  server_->Get("/api/v1/panel", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service_->panel());
  });
  if (!static_dir.empty() && !server_->set_mount_point("/", static_dir))
    throw ConfigError("static directory '" + static_dir + "' does not exist");
  server_->set_logger([](const httplib::Request& req, const httplib::Response& res) {
    std::fprintf(stderr, "%s %s %d\n", req.method.c_str(), req.path.c_str(), res.status);
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace mixlr
