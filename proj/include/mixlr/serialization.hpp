#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "mixlr/casework.hpp"
#include "mixlr/metrics.hpp"
#include "mixlr/system.hpp"

// JSON wire and file formats. Doubles are written in shortest round-trip
// form, so documents reload bit-for-bit.
namespace mixlr::io {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kModelFormat = "mixlr-model";
inline constexpr int kModelFormatVersion = 1;

Json to_json(const MarkerPanel& panel);
MarkerPanel panel_from_json(const Json& j);

Json to_json(const BackgroundLevels& bg);
// Unlisted fluids keep their value from `base`.
BackgroundLevels background_from_json(const Json& j, BackgroundLevels base = {});

Json to_json(const HypothesisPair& hp);
Json to_json(const Calibrator& c);
Json to_json(const MetricReport& m);
Json to_json(const VerbalConclusion& v);
Json to_json(const TippettCurve& curve);

Json to_json(const LrSystem& system);
// Throws DataError on malformed documents.
LrSystem system_from_json(const Json& j);
std::string dump_model(const LrSystem& system);
LrSystem load_model_file(const std::string& path);
void save_model_file(const LrSystem& system, const std::string& path);

// {"markers": {"HBB": {"detected": 3, "total": 4}, ...}}; every panel marker
// must be present and no others.
CaseObservation case_from_json(const Json& j, const MarkerPanel& panel);
Json to_json(const CaseObservation& obs);
Json to_json(const CaseReport& report);

// Parses text, rethrowing syntax errors as DataError.
Json parse(std::string_view text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace mixlr::io
