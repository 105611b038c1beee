#include "mixlr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <thread>

#include "mixlr/error.hpp"
#include "mixlr/serialization.hpp"
#include "text_util.hpp"
#include "tomlplusplus/toml.hpp"

namespace mixlr {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kDataStream = 0xDA7A;

void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (auto&& [k, v] : t) {
    if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end())
      throw ConfigError("unknown key '" + std::string(k.str()) + "'" + (where.empty() ? "" : " in [" + where + "]"));
  }
}

template <typename T>
T need(const toml::node& n, const std::string& key) {
  auto v = n.value<T>();
  if (!v) throw ConfigError("'" + key + "' has the wrong type");
  return *v;
}

double need_number(const toml::node& n, const std::string& key) {
  if (n.is_integer()) return static_cast<double>(n.as_integer()->get());
  if (n.is_floating_point()) return n.as_floating_point()->get();
  throw ConfigError("'" + key + "' must be a number");
}

std::size_t need_count(const toml::node& n, const std::string& key) {
  if (!n.is_integer() || n.as_integer()->get() < 0) throw ConfigError("'" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(n.as_integer()->get());
}

const toml::table& need_table(const toml::node& n, const std::string& key) {
  if (!n.is_table()) throw ConfigError("'" + key + "' must be a table");
  return *n.as_table();
}

std::vector<std::string> string_list(const toml::node& n, const std::string& key) {
  std::vector<std::string> out;
  if (n.is_string()) return {n.as_string()->get()};
  if (!n.is_array()) throw ConfigError("'" + key + "' must be a string or an array of strings");
  for (const auto& e : *n.as_array()) {
    if (!e.is_string()) throw ConfigError("'" + key + "' must contain strings");
    out.push_back(e.as_string()->get());
  }
  return out;
}

LabelSet parse_interest(const toml::node& n) {
  LabelSet s;
  if (n.is_string()) {
    try {
      s = LabelSet::parse(n.as_string()->get());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  } else if (n.is_array()) {
    for (const auto& f : string_list(n, "interest_sets")) {
      const auto fluid = try_parse_fluid(f);
      if (!fluid) throw ConfigError("unknown fluid '" + f + "' in interest_sets");
      s.insert(*fluid);
    }
  } else {
    throw ConfigError("interest_sets entries must be strings or arrays of fluid names");
  }
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) { return detail::format_double(v); }

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Re-throws the active exception with `context` prepended, keeping the
// error family so exit codes survive.
[[noreturn]] void rethrow_with(const std::string& context) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(context + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context + ": " + e.what());
  }
}

template <typename Job>
void run_parallel(std::size_t jobs, unsigned threads, Job&& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RunParts {
  AugmentedDataset train, calibration, test;
};

RunParts augment_run(const Dataset& singles, const ExperimentConfig& cfg, const BackgroundLevels& train_bg,
                     const BackgroundLevels& test_bg, Dichotomization mode, std::uint64_t seed) {
  SplitSpec split = cfg.split;
  split.seed = derive_seed(seed, {1});
  const auto parts = split_dataset(singles, split);
  const DonorPool train_pool(parts.train), calib_pool(parts.calibration), test_pool(parts.test);
  return {augment_part(train_pool, train_bg, cfg.augmentation.train, mode, derive_seed(seed, {2, 0})),
          augment_part(calib_pool, train_bg, cfg.augmentation.calibration, mode, derive_seed(seed, {2, 1})),
          augment_part(test_pool, test_bg, cfg.augmentation.test, mode, derive_seed(seed, {2, 2}))};
}

SystemSpec spec_for(const ExperimentConfig& cfg, Strategy strategy, Dichotomization mode,
                    const BackgroundLevels& bg, std::vector<LabelSet> interest) {
  SystemSpec spec;
  spec.strategy = strategy;
  spec.mode = mode;
  spec.background = bg;
  spec.interest_sets = std::move(interest);
  spec.training = cfg.training;
  spec.calibration = cfg.calibration;
  return spec;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (dichotomization.empty()) throw ConfigError("at least one dichotomization mode is required");
  if (interest_sets.empty()) throw ConfigError("at least one interest set is required");
  for (auto s : interest_sets)
    if (s.empty()) throw ConfigError("interest sets must be non-empty");
  if (!(cap > 1.0) || !std::isfinite(cap)) throw ConfigError("cap must be a finite number above 1");
  if (data.kind == DataSource::Kind::csv && data.path.empty()) throw ConfigError("data.path is required for csv data");
  if (data.kind == DataSource::Kind::synthesize && (data.n_per_fluid < 3 || data.replicates < 2 || data.replicates > 4))
    throw ConfigError("synthesis needs n_per_fluid >= 3 and 2..4 replicates");
  if (augmentation.train == 0 || augmentation.calibration == 0 || augmentation.test == 0)
    throw ConfigError("augmentation counts must be positive");
  try {
    split.validate();
    training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_experiment_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ConfigError("config line " + std::to_string(where.line) + ": " + std::string(e.description()));
  }
  check_keys(root,
             {"seed", "runs", "strategies", "dichotomization", "interest_sets", "cap", "threads", "data", "split",
              "augmentation", "backgrounds", "training", "calibration"},
             "");
  ExperimentConfig cfg;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).lexically_normal().string();
  };

  if (auto n = root.get("seed")) {
    if (!n->is_integer() || n->as_integer()->get() < 0) throw ConfigError("'seed' must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(n->as_integer()->get());
  }
  if (auto n = root.get("runs")) cfg.runs = static_cast<int>(need<std::int64_t>(*n, "runs"));
  if (auto n = root.get("cap")) cfg.cap = need_number(*n, "cap");
  if (auto n = root.get("threads")) cfg.threads = static_cast<unsigned>(need_count(*n, "threads"));
  if (auto n = root.get("strategies")) {
    cfg.strategies.clear();
    for (const auto& s : string_list(*n, "strategies")) cfg.strategies.push_back(parse_strategy(s));
  }
  if (auto n = root.get("dichotomization")) {
    cfg.dichotomization.clear();
    if (n->is_boolean()) {
      cfg.dichotomization.push_back(n->as_boolean()->get() ? Dichotomization::per_replicate : Dichotomization::off);
    } else {
      for (const auto& s : string_list(*n, "dichotomization")) cfg.dichotomization.push_back(parse_dichotomization(s));
    }
  }
  if (auto n = root.get("interest_sets")) {
    if (!n->is_array()) throw ConfigError("'interest_sets' must be an array");
    for (const auto& e : *n->as_array()) cfg.interest_sets.push_back(parse_interest(e));
  }

  if (auto n = root.get("data")) {
    const auto& t = need_table(*n, "data");
    check_keys(t, {"source", "path", "rates", "n_per_fluid", "replicates", "seed"}, "data");
    if (auto s = t.get("source")) {
      const auto src = need<std::string>(*s, "data.source");
      if (src == "synthesize")
        cfg.data.kind = DataSource::Kind::synthesize;
      else if (src == "csv")
        cfg.data.kind = DataSource::Kind::csv;
      else
        throw ConfigError("data.source must be 'synthesize' or 'csv'");
    }
    if (auto s = t.get("path")) cfg.data.path = resolve(need<std::string>(*s, "data.path"));
    if (auto s = t.get("rates")) {
      const auto r = need<std::string>(*s, "data.rates");
      cfg.data.rates = r == "table1" ? r : resolve(r);
    }
    if (auto s = t.get("n_per_fluid")) cfg.data.n_per_fluid = need_count(*s, "data.n_per_fluid");
    if (auto s = t.get("replicates")) cfg.data.replicates = need_count(*s, "data.replicates");
    if (auto s = t.get("seed")) cfg.data.seed = static_cast<std::uint64_t>(need_count(*s, "data.seed"));
  }
  if (auto n = root.get("split")) {
    const auto& t = need_table(*n, "split");
    check_keys(t, {"train", "calibration", "test"}, "split");
    if (auto s = t.get("train")) cfg.split.train = need_number(*s, "split.train");
    if (auto s = t.get("calibration")) cfg.split.calibration = need_number(*s, "split.calibration");
    if (auto s = t.get("test")) cfg.split.test = need_number(*s, "split.test");
  }
  if (auto n = root.get("augmentation")) {
    const auto& t = need_table(*n, "augmentation");
    check_keys(t, {"train", "calibration", "test"}, "augmentation");
    if (auto s = t.get("train")) cfg.augmentation.train = need_count(*s, "augmentation.train");
    if (auto s = t.get("calibration")) cfg.augmentation.calibration = need_count(*s, "augmentation.calibration");
    if (auto s = t.get("test")) cfg.augmentation.test = need_count(*s, "augmentation.test");
  }
  if (auto n = root.get("backgrounds")) {
    for (auto&& [k, v] : need_table(*n, "backgrounds")) {
      const auto fluid = try_parse_fluid(k.str());
      if (!fluid) throw ConfigError("unknown fluid '" + std::string(k.str()) + "' in [backgrounds]");
      const double level = need_number(v, "backgrounds." + std::string(k.str()));
      if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("background levels must lie in [0, 1]");
      cfg.backgrounds.set(*fluid, level);
    }
  }
  if (auto n = root.get("training")) {
    const auto& t = need_table(*n, "training");
    check_keys(t, {"lambda", "tolerance", "max_iterations", "seed"}, "training");
    if (auto s = t.get("lambda")) cfg.training.lambda = need_number(*s, "training.lambda");
    if (auto s = t.get("tolerance")) cfg.training.tolerance = need_number(*s, "training.tolerance");
    if (auto s = t.get("max_iterations"))
      cfg.training.max_iterations = static_cast<int>(need_count(*s, "training.max_iterations"));
    if (auto s = t.get("seed")) cfg.training.seed = static_cast<std::uint64_t>(need_count(*s, "training.seed"));
  }
  if (auto n = root.get("calibration")) {
    const auto& t = need_table(*n, "calibration");
    check_keys(t, {"correct_prior", "slope_penalty"}, "calibration");
    if (auto s = t.get("correct_prior")) cfg.calibration.correct_prior = need<bool>(*s, "calibration.correct_prior");
    if (auto s = t.get("slope_penalty")) cfg.calibration.slope_penalty = need_number(*s, "calibration.slope_penalty");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(text, std::filesystem::path(path).parent_path());
}

Json canonical_config(const ExperimentConfig& cfg) {
  Json j;
  Json data;
  data["source"] = cfg.data.kind == DataSource::Kind::csv ? "csv" : "synthesize";
  if (cfg.data.kind == DataSource::Kind::csv) {
    data["path"] = cfg.data.path;
  } else {
    data["rates"] = cfg.data.rates;
    data["n_per_fluid"] = cfg.data.n_per_fluid;
    data["replicates"] = cfg.data.replicates;
    data["seed"] = data_seed(cfg);
  }
  j["data"] = data;
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  j["split"] = {{"train", cfg.split.train}, {"calibration", cfg.split.calibration}, {"test", cfg.split.test}};
  j["augmentation"] = {{"train", cfg.augmentation.train},
                       {"calibration", cfg.augmentation.calibration},
                       {"test", cfg.augmentation.test}};
  j["backgrounds"] = io::to_json(cfg.backgrounds);
  Json strategies = Json::array();
  for (auto s : cfg.strategies) strategies.push_back(std::string(to_string(s)));
  j["strategies"] = strategies;
  Json modes = Json::array();
  for (auto m : cfg.dichotomization) modes.push_back(std::string(to_string(m)));
  j["dichotomization"] = modes;
  Json sets = Json::array();
  for (auto s : cfg.interest_sets) sets.push_back(s.to_string());
  j["interest_sets"] = sets;
  j["cap"] = cfg.cap;
  j["training"] = {{"lambda", cfg.training.lambda},
                   {"tolerance", cfg.training.tolerance},
                   {"max_iterations", cfg.training.max_iterations},
                   {"seed", cfg.training.seed}};
  j["calibration"] = {{"correct_prior", cfg.calibration.correct_prior},
                      {"slope_penalty", cfg.calibration.slope_penalty}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const auto text = canonical_config(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

std::uint64_t run_seed(std::uint64_t master, int run) { return derive_seed(master, {static_cast<std::uint64_t>(run)}); }

std::uint64_t data_seed(const ExperimentConfig& cfg) {
  return cfg.data.seed ? *cfg.data.seed : derive_seed(cfg.seed, {kDataStream});
}

Dataset load_singles(const ExperimentConfig& cfg, LoadReport* report) {
  const auto panel = MarkerPanel::standard();
  Dataset raw;
  LoadReport rep;
  if (cfg.data.kind == DataSource::Kind::csv) {
    auto parsed = parse_profile_table(io::read_file(cfg.data.path), panel);
    raw = std::move(parsed.dataset);
    rep = std::move(parsed.report);
  } else {
    const RateTable rates = cfg.data.rates == "table1" ? reference_detection_rates()
                                                       : parse_rate_table(io::read_file(cfg.data.rates), panel);
    SynthesisOptions opts;
    opts.n_per_fluid = cfg.data.n_per_fluid;
    opts.reps_per_sample = cfg.data.replicates;
    opts.seed = data_seed(cfg);
    raw = synthesize_dataset(rates, panel, opts);
    rep.rows = raw.samples.size() * opts.reps_per_sample;
    rep.samples_loaded = raw.samples.size();
  }
  Dataset singles{raw.panel, {}};
  for (auto& s : raw.samples) {
    if (!passes_housekeeping_filter(s)) {
      if (std::find(rep.excluded_ids.begin(), rep.excluded_ids.end(), s.id) == rep.excluded_ids.end())
        rep.excluded_ids.push_back(s.id);
      continue;
    }
    if (s.is_single()) singles.samples.push_back(std::move(s));
  }
  if (report) *report = std::move(rep);
  return singles;
}

std::vector<CllrSummary> ExperimentReport::cllr_summary() const {
  std::vector<CllrSummary> out;
  std::vector<std::vector<double>> values;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CllrSummary& s) {
      return s.strategy == c.strategy && s.mode == c.mode && s.interest == c.interest;
    });
    if (it == out.end()) {
      out.push_back({c.strategy, c.mode, c.interest});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(c.metrics.cllr);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    auto& s = out[i];
    s.runs = v.size();
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    s.q1 = quantile(v, 0.25);
    s.median = quantile(v, 0.5);
    s.q3 = quantile(v, 0.75);
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  LoadReport load;
  const auto singles = load_singles(cfg, &load);
  auto report = run_experiment(cfg, singles);
  report.data = std::move(load);
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& singles) {
  cfg.validate();
  ExperimentReport report;
  report.config = canonical_config(cfg);
  report.config_hash = config_hash(cfg);
  report.master_seed = cfg.seed;
  report.data_seed = data_seed(cfg);
  report.data.samples_loaded = singles.samples.size();
  for (int r = 0; r < cfg.runs; ++r) report.run_seeds.push_back(run_seed(cfg.seed, r));

  const std::size_t n_modes = cfg.dichotomization.size(), n_strategies = cfg.strategies.size();
  const std::size_t jobs = static_cast<std::size_t>(cfg.runs) * n_modes * n_strategies;
  std::vector<std::vector<CellResult>> results(jobs);

  run_parallel(jobs, cfg.threads, [&](std::size_t job) {
    const int run = static_cast<int>(job / (n_modes * n_strategies));
    const auto mode = cfg.dichotomization[(job / n_strategies) % n_modes];
    const auto strategy = cfg.strategies[job % n_strategies];
    const auto seed = report.run_seeds[static_cast<std::size_t>(run)];
    try {
      const auto parts = augment_run(singles, cfg, cfg.backgrounds, cfg.backgrounds, mode, seed);
      const auto system = fit_system(singles.panel, parts.train, parts.calibration,
                                     spec_for(cfg, strategy, mode, cfg.backgrounds, cfg.interest_sets));
      for (auto interest : cfg.interest_sets) {
        const auto flags = parts.test.h1_flags(interest);
        std::vector<double> scores;
        std::vector<LRValue> lrs;
        for (const auto& s : parts.test.samples) {
          const double score = system.log10_score(interest, s.features);
          scores.push_back(score);
          lrs.push_back(apply_calibrator_log10(system.calibrators.at(interest), score));
        }
        CellResult cell;
        cell.run = run;
        cell.run_seed = seed;
        cell.strategy = strategy;
        cell.mode = mode;
        cell.interest = interest;
        cell.metrics = evaluate_lrs(lrs, flags);
        cell.score_auc = roc_auc(scores, flags, 0.0).auc;
        std::vector<LRValue> h1, h2;
        for (std::size_t i = 0; i < lrs.size(); ++i) (flags[i] ? h1 : h2).push_back(lrs[i]);
        cell.tippett = tippett(h1, h2);
        results[job].push_back(std::move(cell));
      }
    } catch (...) {
      rethrow_with("run " + std::to_string(run) + ", " + std::string(to_string(strategy)) + ", " +
                   std::string(to_string(mode)));
    }
  });

  for (auto& r : results)
    for (auto& c : r) report.cells.push_back(std::move(c));
  return report;
}

std::string metrics_csv(const ExperimentReport& report) {
  std::string out = "config_hash,run,run_seed,strategy,dichotomization,interest,cllr,auc,score_auc,fp_rate,fn_rate,n_h1,n_h2\n";
  for (const auto& c : report.cells) {
    out += report.config_hash + "," + std::to_string(c.run) + "," + std::to_string(c.run_seed) + "," +
           std::string(to_string(c.strategy)) + "," + std::string(to_string(c.mode)) + "," + c.interest.to_string() +
           "," + num(c.metrics.cllr) + "," + num(c.metrics.auc) + "," + num(c.score_auc) + "," +
           num(c.metrics.fp_rate) + "," + num(c.metrics.fn_rate) + "," + std::to_string(c.metrics.n_h1) + "," +
           std::to_string(c.metrics.n_h2) + "\n";
  }
  return out;
}

std::string tippett_csv(const ExperimentReport& report) {
  std::string out = "config_hash,run,strategy,dichotomization,interest,log10_lr,fraction_h1,fraction_h2\n";
  for (const auto& c : report.cells) {
    const std::string prefix = report.config_hash + "," + std::to_string(c.run) + "," +
                               std::string(to_string(c.strategy)) + "," + std::string(to_string(c.mode)) + "," +
                               c.interest.to_string() + ",";
    for (const auto& p : c.tippett.points)
      out += prefix + num(p.threshold) + "," + num(p.fraction_h1) + "," + num(p.fraction_h2) + "\n";
  }
  return out;
}

std::string cllr_summary_csv(const ExperimentReport& report) {
  std::string out = "config_hash,strategy,dichotomization,interest,runs,min,q1,median,q3,max,mean\n";
  for (const auto& s : report.cllr_summary()) {
    out += report.config_hash + "," + std::string(to_string(s.strategy)) + "," + std::string(to_string(s.mode)) +
           "," + s.interest.to_string() + "," + std::to_string(s.runs) + "," + num(s.min) + "," + num(s.q1) + "," +
           num(s.median) + "," + num(s.q3) + "," + num(s.max) + "," + num(s.mean) + "\n";
  }
  return out;
}

Json report_json(const ExperimentReport& report) {
  Json j;
  j["config_hash"] = report.config_hash;
  j["config"] = report.config;
  j["master_seed"] = report.master_seed;
  j["data_seed"] = report.data_seed;
  j["run_seeds"] = report.run_seeds;
  j["data"] = {{"rows", report.data.rows},
               {"samples_loaded", report.data.samples_loaded},
               {"excluded_ids", report.data.excluded_ids}};
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json e;
    e["config_hash"] = report.config_hash;
    e["run"] = c.run;
    e["run_seed"] = c.run_seed;
    e["strategy"] = std::string(to_string(c.strategy));
    e["dichotomization"] = std::string(to_string(c.mode));
    e["interest"] = c.interest.to_string();
    e["metrics"] = io::to_json(c.metrics);
    e["score_auc"] = c.score_auc;
    e["tippett"] = io::to_json(c.tippett);
    cells.push_back(e);
  }
  j["cells"] = cells;
  Json summary = Json::array();
  for (const auto& s : report.cllr_summary()) {
    summary.push_back({{"config_hash", report.config_hash},
                       {"strategy", std::string(to_string(s.strategy))},
                       {"dichotomization", std::string(to_string(s.mode))},
                       {"interest", s.interest.to_string()},
                       {"runs", s.runs},
                       {"min", s.min},
                       {"q1", s.q1},
                       {"median", s.median},
                       {"q3", s.q3},
                       {"max", s.max},
                       {"mean", s.mean}});
  }
  j["cllr_summary"] = summary;
  return j;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
  io::write_file((dir / "metrics.csv").string(), metrics_csv(report));
  io::write_file((dir / "tippett.csv").string(), tippett_csv(report));
  io::write_file((dir / "cllr_summary.csv").string(), cllr_summary_csv(report));
  io::write_file((dir / "report.json").string(), report_json(report).dump(2) + "\n");
}

SensitivityResult sensitivity_analysis(const ExperimentConfig& cfg, BodyFluid fluid, double level) {
  return sensitivity_analysis(cfg, load_singles(cfg), fluid, level);
}

SensitivityResult sensitivity_analysis(const ExperimentConfig& cfg, const Dataset& singles, BodyFluid fluid,
                                       double level) {
  cfg.validate();
  if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("level must lie in [0, 1]");
  SensitivityResult r{fluid, level, cfg.strategies.front(), cfg.dichotomization.front(), cfg.interest_sets.front(),
                      {}, 0.0};
  if (r.interest.contains(fluid))
    throw ConfigError(std::string(to_string(fluid)) + " is a fluid of interest; shift a background fluid instead");

  BackgroundLevels shifted = cfg.backgrounds;
  shifted.set(fluid, level);
  const auto seed = run_seed(cfg.seed, 0);
  const auto base = augment_run(singles, cfg, cfg.backgrounds, cfg.backgrounds, r.mode, seed);
  const auto moved = augment_run(singles, cfg, shifted, cfg.backgrounds, r.mode, seed);

  const auto sys_base = fit_system(singles.panel, base.train, base.calibration,
                                   spec_for(cfg, r.strategy, r.mode, cfg.backgrounds, {r.interest}));
  const auto sys_moved = fit_system(singles.panel, moved.train, moved.calibration,
                                    spec_for(cfg, r.strategy, r.mode, shifted, {r.interest}));
  const auto flags = base.test.h1_flags(r.interest);
  std::vector<double> deltas;
  for (std::size_t i = 0; i < base.test.samples.size(); ++i) {
    const auto& x = base.test.samples[i].features;
    SensitivityRow row{sys_base.lr(r.interest, x).log10_lr(), sys_moved.lr(r.interest, x).log10_lr(), flags[i]};
    if (!std::isfinite(row.log10_lr_uniform) || !std::isfinite(row.log10_lr_shifted))
      throw NumericError("non-finite LR in sensitivity analysis");
    deltas.push_back(std::abs(row.log10_lr_shifted - row.log10_lr_uniform));
    r.rows.push_back(row);
  }
  r.median_abs_delta = deltas.empty() ? 0.0 : quantile(deltas, 0.5);
  return r;
}

std::string sensitivity_csv(const SensitivityResult& r) {
  std::string out = "log10_lr_uniform,log10_lr_shifted,h1\n";
  for (const auto& row : r.rows)
    out += num(row.log10_lr_uniform) + "," + num(row.log10_lr_shifted) + "," + (row.h1 ? "1" : "0") + "\n";
  return out;
}

Json sensitivity_json(const SensitivityResult& r, const std::string& config_hash) {
  Json j;
  j["config_hash"] = config_hash;
  j["fluid"] = std::string(to_string(r.fluid));
  j["level"] = r.level;
  j["strategy"] = std::string(to_string(r.strategy));
  j["dichotomization"] = std::string(to_string(r.mode));
  j["interest"] = r.interest.to_string();
  j["rows"] = r.rows.size();
  j["median_abs_delta_log10_lr"] = r.median_abs_delta;
  return j;
}

std::size_t verbal_bucket(const VerbalConclusion& v) noexcept {
  const auto s = static_cast<std::size_t>(v.strength);
  if (v.favours == Favours::h1) return 5 + s;
  if (v.favours == Favours::h2) return 5 - s;
  return 5;
}

std::string verbal_bucket_label(std::size_t bucket) {
  VerbalConclusion v;
  if (bucket > 5) {
    v = {static_cast<Strength>(bucket - 5), Favours::h1};
  } else if (bucket < 5) {
    v = {static_cast<Strength>(5 - bucket), Favours::h2};
  }
  return v.describe();
}

std::size_t CrossTab::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

std::string CrossTab::to_csv() const {
  static constexpr std::array<NOverTwoVerdict, 3> kRows{NOverTwoVerdict::indication,
                                                        NOverTwoVerdict::no_reliable_statement,
                                                        NOverTwoVerdict::no_indication};
  std::string out = "n_over_2";
  for (std::size_t b = 0; b < kVerbalBuckets; ++b) out += ",\"" + verbal_bucket_label(b) + "\"";
  out += ",total\n";
  for (std::size_t r = 0; r < 3; ++r) {
    out += std::string(to_string(kRows[r]));
    std::size_t sum = 0;
    for (auto c : counts[r]) {
      out += "," + std::to_string(c);
      sum += c;
    }
    out += "," + std::to_string(sum) + "\n";
  }
  return out;
}

CrossTab compare_with_n_over_2(const LrSystem& system, std::span<const CaseObservation> cases,
                               const HypothesisPair& hp, const CaseOptions& options) {
  if (cases.empty()) throw std::invalid_argument("no cases to compare");
  CrossTab tab;
  for (const auto& obs : cases) {
    const auto report = evaluate_case(system, obs, hp, options);
    if (!report.n_over_2_combined) throw DataError("n/2 is undefined for " + hp.interest.to_string());
    const auto row = static_cast<std::size_t>(report.n_over_2_combined->verdict);
    ++tab.counts[row][verbal_bucket(report.verbal)];
  }
  return tab;
}

}  // namespace mixlr
