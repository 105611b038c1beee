#include <cmath>
#include <cstring>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "mixlr/error.hpp"
#include "mixlr/serialization.hpp"
#include "mixlr/service.hpp"

using namespace mixlr;
using namespace mixlr::testing;

namespace {

std::shared_ptr<ModelStore> fixture_store() {
  return std::shared_ptr<ModelStore>(ModelStore::load_directory(source_dir() + "/data/fixtures"));
}

std::string case_request(int n, const std::string& extra = "") {
  io::Json req;
  req["interest"] = {"vaginal_mucosa", "menstrual_secretion"};
  req["case"] = io::to_json(worked_case(n));
  std::string body = req.dump();
  if (!extra.empty()) body.insert(body.size() - 1, "," + extra);
  return body;
}

std::string error_code(const HttpResponse& r) { return io::parse(r.body)["error"]["code"]; }

}  // namespace

TEST_CASE("evaluate endpoint") {
  const Service svc(fixture_store());

  const auto ok = svc.evaluate(case_request(3));
  REQUIRE(ok.status == 200);
  const auto j = io::parse(ok.body);
  CHECK(std::abs(j["report"]["log10_lr"].get<double>() - 1.5) <= 0.05);
  CHECK(j["report"]["verbal"]["label"] == "moderate support");
  CHECK(j["server_version"] == kServerVersion);
  CHECK(j["variant"]["variant_id"] == reference_system(false).variant_id());

  // Numerically identical to the library call.
  const auto direct = evaluate_case(reference_system(false), worked_case(3), HypothesisPair{kVaginalMenstrual, {}, {}});
  CHECK(j["report"]["log10_lr"].get<double>() == direct.log10_lr);
  CHECK(j["report"].dump() == io::to_json(direct).dump());

  CHECK(svc.evaluate(case_request(3)).body == ok.body);

  const auto penile = svc.evaluate(case_request(3, R"("background": {"skin_penile": 1})"));
  REQUIRE(penile.status == 200);
  CHECK(std::abs(io::parse(penile.body)["report"]["log10_lr"].get<double>() - 0.8) <= 0.05);

  const auto by_id = svc.evaluate(case_request(3, "\"variant_id\": \"" + reference_system(true).variant_id() + "\""));
  REQUIRE(by_id.status == 200);
  CHECK(io::parse(by_id.body)["report"]["log10_lr"] == io::parse(penile.body)["report"]["log10_lr"]);
}

TEST_CASE("evaluate errors") {
  const Service svc(fixture_store());

  auto req = io::parse(case_request(1));
  req["case"]["markers"]["HBB2"] = req["case"]["markers"]["HBB"];
  req["case"]["markers"].erase("HBB");
  const auto bad_marker = svc.evaluate(req.dump());
  CHECK(bad_marker.status == 400);
  CHECK(error_code(bad_marker) == "invalid_request");
  CHECK(bad_marker.body.find("HBB2") != std::string::npos);

  CHECK(svc.evaluate("{not json").status == 400);
  CHECK(svc.evaluate("[]").status == 400);
  CHECK(svc.evaluate(R"({"interest": ["urine"], "case": {"markers": {}}})").status == 400);
  CHECK(svc.evaluate(case_request(1, R"("colour": 1)")).status == 400);
  CHECK(svc.evaluate(case_request(1, R"("background": {"blood": 2})")).status == 400);

  const auto missing = svc.evaluate(case_request(1, R"("variant_id": "nope")"));
  CHECK(missing.status == 404);
  CHECK(error_code(missing) == "unknown_variant");

  const auto untrained = svc.evaluate(case_request(1, R"("background": {"blood": 0.9})"));
  CHECK(untrained.status == 409);
  CHECK(error_code(untrained) == "variant_unavailable");
}

TEST_CASE("models and panel endpoints") {
  const Service empty(std::make_shared<ModelStore>());
  CHECK(io::parse(empty.models().body)["models"].empty());

  const Service svc(fixture_store());
  const auto models = io::parse(svc.models().body)["models"];
  REQUIRE(models.size() == 2);
  CHECK(models[0]["variant_id"] < models[1]["variant_id"]);
  CHECK(models[0]["variant_id"] != models[1]["variant_id"]);

  // Coefficients as stored on disk.
  for (const auto& m : models) {
    const bool penile = m["variant_id"].get<std::string>().find("skin_penile") != std::string::npos;
    const auto disk = io::parse(io::read_file(source_dir() + "/data/fixtures/" +
                                              (penile ? "reference_penile.json" : "reference_default.json")));
    CHECK(m["classifiers"] == disk["classifiers"]);
    CHECK(m["calibrators"] == disk["calibrators"]);
  }

  const auto panel = io::parse(svc.panel().body);
  REQUIRE(panel["markers"].size() == 15);
  CHECK(panel["markers"][0] == "HBB");
  CHECK(panel["markers"][14] == "PRM1");
  CHECK(panel["fluids"].size() == 9);
  for (const auto& m : panel["markers"]) CHECK(m.get<std::string>().rfind("HK", 0) != 0);
}

TEST_CASE("model documents reload bit for bit") {
  const auto dir = temp_dir("serialize");
  Rng rng(1);
  auto s = reference_system(false);
  auto& m = s.binary.begin()->second;
  for (auto& c : m.coefficients) c = rng.normal() / 3.0;
  m.intercept = std::nextafter(0.1, 1.0);
  s.calibrators.begin()->second = Calibrator{rng.normal(), 0.7 + rng.uniform(), std::log10(3.0)};
  io::save_model_file(s, (dir / "m.json").string());
  const auto back = io::load_model_file((dir / "m.json").string());
  const auto& mb = back.binary.at(kVaginalMenstrual);
  CHECK(std::memcmp(&mb.intercept, &m.intercept, sizeof(double)) == 0);
  CHECK(mb.coefficients == m.coefficients);
  const auto& ca = s.calibrators.begin()->second;
  const auto& cb = back.calibrators.at(kVaginalMenstrual);
  CHECK(ca.a0 == cb.a0);
  CHECK(ca.a1 == cb.a1);
  CHECK(ca.prior_log_odds == cb.prior_log_odds);
  CHECK(back.variant_id() == s.variant_id());
  CHECK(io::dump_model(back) == io::dump_model(s));

  auto doc = io::to_json(s);
  doc["format"] = "other";
  CHECK_THROWS_AS(io::system_from_json(doc), DataError);
  CHECK_THROWS_AS(io::load_model_file((dir / "none.json").string()), DataError);
}

TEST_CASE("http server over a real socket") {
  auto service = std::make_shared<Service>(fixture_store());
  HttpServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  auto panel = client.Get("/api/v1/panel");
  auto eval = client.Post("/api/v1/evaluate", case_request(3), "application/json");
  auto bad = client.Post("/api/v1/evaluate", "{", "application/json");
  server.stop();
  t.join();

  REQUIRE(panel);
  CHECK(panel->status == 200);
  REQUIRE(eval);
  CHECK(eval->status == 200);
  CHECK(eval->body == service->evaluate(case_request(3)).body);
  REQUIRE(bad);
  CHECK(bad->status == 400);
}
