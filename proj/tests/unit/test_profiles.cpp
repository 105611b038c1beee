#include <cmath>
#include <string>

#include "doctest.h"
#include "mixlr/error.hpp"
#include "mixlr/profiles.hpp"

using namespace mixlr;

namespace {

const char* kHeader =
    "sample_id,fluid_labels,replicate_id,HBB,ALAS2,CD93,HTN3,STATH,BPIFA1,MUC4,MYOZ1,CYP2B7P1,MMP10,MMP7,MMP11,"
    "SEMG1,KLK3,PRM1,HK1,HK2\n";

std::string row(const std::string& id, const std::string& labels, int rep, double hbb, int hk1 = 1, int hk2 = 1) {
  std::string r = id + "," + labels + "," + std::to_string(rep) + "," + std::to_string(hbb);
  for (int i = 1; i < 15; ++i) r += ",0";
  return r + "," + std::to_string(hk1) + "," + std::to_string(hk2) + "\n";
}

Replicate rep_with(std::vector<double> rfu) { return {std::move(rfu), {true, true}}; }

}  // namespace

TEST_CASE("fluid names round-trip and aliases resolve") {
  for (auto f : kAllFluids) CHECK(parse_fluid(to_string(f)) == f);
  CHECK(parse_fluid("penile") == BodyFluid::skin_penile);
  CHECK(parse_fluid("vaginal") == BodyFluid::vaginal_mucosa);
  CHECK(parse_fluid("menstrual") == BodyFluid::menstrual_secretion);
  CHECK_THROWS_AS(parse_fluid("urine"), DataError);
}

TEST_CASE("label sets") {
  const LabelSet s{BodyFluid::vaginal_mucosa, BodyFluid::menstrual_secretion};
  CHECK(s.size() == 2);
  CHECK(s.to_string() == "menstrual_secretion+vaginal_mucosa");
  CHECK(LabelSet::parse("vaginal_mucosa,menstrual_secretion") == s);
  CHECK(LabelSet::parse(s.to_string()) == s);
  CHECK(LabelSet{}.to_string() == "none");
  CHECK(LabelSet::parse("none").empty());
  CHECK(s.intersects(LabelSet{BodyFluid::vaginal_mucosa}));
  CHECK_FALSE(s.intersects(LabelSet{BodyFluid::blood}));
  CHECK((s - LabelSet{BodyFluid::vaginal_mucosa}) == LabelSet{BodyFluid::menstrual_secretion});
  CHECK(LabelSet::all().size() == kFluidCount);
}

TEST_CASE("standard panel") {
  const auto p = MarkerPanel::standard();
  REQUIRE(p.size() == 15);
  CHECK(p.markers.front() == "HBB");
  CHECK(p.markers.back() == "PRM1");
  CHECK(p.housekeeping.size() == 2);
  CHECK(p.threshold_rfu == 150.0);
  CHECK(p.index_of("MUC4") == 6u);
  CHECK_FALSE(p.index_of("HK1"));
}

TEST_CASE("profile table parsing") {
  const auto panel = MarkerPanel::standard();

  SUBCASE("well-formed table") {
    std::string csv = kHeader;
    for (int r = 1; r <= 4; ++r) csv += row("s1", "blood", r, 200.0);
    for (int r = 1; r <= 4; ++r) csv += row("s2", "saliva", r, 0.0);
    const auto parsed = parse_profile_table(csv, panel);
    REQUIRE(parsed.dataset.samples.size() == 2);
    CHECK(parsed.report.rows == 8);
    CHECK(parsed.dataset.samples[0].replicates.size() == 4);
    CHECK(parsed.dataset.samples[0].labels == LabelSet{BodyFluid::blood});
    CHECK(parsed.dataset.samples[0].replicates[0].rfu[0] == 200.0);
  }

  SUBCASE("housekeeping failure excludes the sample") {
    std::string csv = kHeader;
    for (int r = 1; r <= 4; ++r) csv += row("ok", "blood", r, 200.0, 1, 0);
    for (int r = 1; r <= 4; ++r) csv += row("bad", "blood", r, 200.0, 0, 0);
    const auto parsed = parse_profile_table(csv, panel);
    REQUIRE(parsed.dataset.samples.size() == 1);
    CHECK(parsed.dataset.samples[0].id == "ok");
    REQUIRE(parsed.report.excluded_ids.size() == 1);
    CHECK(parsed.report.excluded_ids[0] == "bad");
  }

  SUBCASE("missing marker column is named") {
    std::string header = kHeader;
    header.replace(header.find(",MUC4"), 5, "");
    try {
      parse_profile_table(header, panel);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.column() == "MUC4");
    }
  }

  SUBCASE("bad values carry row and column") {
    std::string csv = kHeader;
    csv += row("s1", "blood", 1, 200.0);
    std::string bad = row("s1", "blood", 2, 200.0);
    bad.replace(bad.find(",200"), 11, ",abc");
    csv += bad;
    try {
      parse_profile_table(csv, panel);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
      CHECK(e.column() == "HBB");
    }
    CHECK_THROWS_AS(parse_profile_table(std::string(kHeader) + row("s", "urine", 1, 0.0), panel), ParseError);
    CHECK_THROWS_AS(parse_profile_table(std::string(kHeader) + row("s", "blood", 1, -5.0), panel), ParseError);
    CHECK_THROWS_AS(parse_profile_table(std::string(kHeader) + row("s", "blood", 1, 5.0, 2), panel), ParseError);
  }

  SUBCASE("replicate count outside 2..4") {
    CHECK_THROWS_AS(parse_profile_table(std::string(kHeader) + row("s", "blood", 1, 0.0), panel), ParseError);
  }

  SUBCASE("write and re-read") {
    SynthesisOptions opts;
    opts.n_per_fluid = 3;
    opts.seed = 5;
    const auto ds = synthesize_dataset(reference_detection_rates(), panel, opts);
    const auto back = parse_profile_table(write_profile_table(ds), panel).dataset;
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      CHECK(back.samples[i].id == ds.samples[i].id);
      CHECK(back.samples[i].replicates[1].rfu == ds.samples[i].replicates[1].rfu);
    }
  }
}

TEST_CASE("housekeeping filter is per sample") {
  Sample s{"x", LabelSet{BodyFluid::blood}, {}};
  s.replicates = {{std::vector<double>(15, 0.0), {false, false}}, {std::vector<double>(15, 0.0), {false, true}}};
  CHECK(passes_housekeeping_filter(s));
  s.replicates[1].housekeeping_detected = {false, false};
  CHECK_FALSE(passes_housekeeping_filter(s));
}

TEST_CASE("dichotomize uses an inclusive threshold") {
  std::vector<double> rfu(15, 0.0);
  rfu[0] = 150.0;
  rfu[1] = 149.0;
  const auto d = dichotomize(rep_with(rfu), 150.0);
  CHECK(d[0] == 1);
  CHECK(d[1] == 0);
  CHECK(dichotomize(rep_with(std::vector<double>(15, 0.0)), 150.0) == std::vector<std::uint8_t>(15, 0));

  // Idempotent when re-applied to its own output scaled by the threshold.
  std::vector<double> scaled;
  for (auto v : d) scaled.push_back(v * 150.0);
  CHECK(dichotomize(rep_with(scaled), 150.0) == d);
}

TEST_CASE("replicate fractions") {
  std::vector<Replicate> reps;
  for (int r = 0; r < 4; ++r) {
    std::vector<double> rfu(15, 0.0);
    rfu[0] = r < 3 ? 500.0 : 10.0;
    reps.push_back(rep_with(rfu));
  }
  auto f = replicate_fractions(reps, 150.0);
  CHECK(f[0] == 0.75);
  CHECK(f[1] == 0.0);

  std::swap(reps[0], reps[3]);
  CHECK(replicate_fractions(reps, 150.0) == f);

  std::vector<Replicate> two(2, rep_with(std::vector<double>(15, 1000.0)));
  CHECK(replicate_fractions(two, 150.0)[4] == 1.0);
  CHECK_THROWS_AS(replicate_fractions(std::vector<Replicate>{}, 150.0), std::invalid_argument);
}

TEST_CASE("detection rates by hand count") {
  Dataset ds{MarkerPanel::standard(), {}};
  for (int s = 0; s < 2; ++s) {
    Sample smp{"s" + std::to_string(s), LabelSet{BodyFluid::saliva}, {}};
    for (int r = 0; r < 2; ++r) {
      std::vector<double> rfu(15, 0.0);
      if (s == 0 && r == 0) rfu[3] = 400.0;
      smp.replicates.push_back(rep_with(rfu));
    }
    ds.samples.push_back(smp);
  }
  CHECK(detection_rates(ds).at(BodyFluid::saliva)[3] == 0.25);
}

TEST_CASE("synthesis honours the rates") {
  const auto panel = MarkerPanel::standard();
  const auto table = reference_detection_rates();
  CHECK(table.size() == kFluidCount);
  CHECK(table.at(BodyFluid::blood)[0] == 1.0);
  CHECK(table.at(BodyFluid::blood)[3] == 0.0);
  CHECK(table.at(BodyFluid::saliva)[3] == doctest::Approx(0.913));

  SynthesisOptions opts;
  opts.n_per_fluid = 2500;
  opts.reps_per_sample = 4;
  opts.seed = 99;
  const auto ds = synthesize_dataset(table, panel, opts);
  const auto rates = detection_rates(ds);

  // 10 000 replicates per fluid; every marker within 3 standard errors.
  for (const auto& [fluid, expected] : table) {
    for (std::size_t m = 0; m < panel.size(); ++m) {
      const double p = expected[m];
      const double se = std::sqrt(p * (1.0 - p) / 10000.0);
      if (p == 0.0 || p == 1.0)
        CHECK(rates.at(fluid)[m] == p);
      else
        CHECK(std::abs(rates.at(fluid)[m] - p) <= 3.0 * se);
    }
  }

  for (const auto& s : ds.samples) {
    for (const auto& r : s.replicates) {
      CHECK(r.housekeeping_detected == std::vector<bool>{true, true});
      break;
    }
  }

  opts.n_per_fluid = 4;
  const auto a = synthesize_dataset(table, panel, opts);
  const auto b = synthesize_dataset(table, panel, opts);
  CHECK(write_profile_table(a) == write_profile_table(b));
  opts.seed = 100;
  CHECK(write_profile_table(synthesize_dataset(table, panel, opts)) != write_profile_table(a));

  auto broken = table;
  broken[BodyFluid::blood][0] = 1.5;
  CHECK_THROWS_AS(synthesize_dataset(broken, panel, opts), DataError);
}

TEST_CASE("rate table round trip") {
  const auto panel = MarkerPanel::standard();
  const auto table = reference_detection_rates();
  CHECK(parse_rate_table(write_rate_table(table, panel), panel) == table);
  CHECK_THROWS_AS(parse_rate_table("fluid,HBB\nblood,2\n", panel), ParseError);
}
