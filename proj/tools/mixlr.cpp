// mixlr command-line front end. Exit codes: 0 ok, 2 configuration error,
// 3 data error, 4 numeric failure.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "mixlr/error.hpp"
#include "mixlr/pipeline.hpp"
#include "mixlr/serialization.hpp"
#include "mixlr/service.hpp"

namespace {

using namespace mixlr;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

// "penile=0", "blood=0.9,saliva=1"
BackgroundLevels parse_background(const std::vector<std::string>& items) {
  BackgroundLevels bg;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("background must look like fluid=level, got '" + item + "'");
    const auto fluid = try_parse_fluid(item.substr(0, eq));
    if (!fluid) throw ConfigError("unknown fluid '" + item.substr(0, eq) + "'");
    double level = 0.0;
    try {
      std::size_t used = 0;
      level = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ConfigError("bad background level in '" + item + "'");
    }
    if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("background level outside [0, 1] in '" + item + "'");
    bg.set(*fluid, level);
  }
  return bg;
}

LabelSet parse_set(const std::string& text) {
  try {
    return LabelSet::parse(text);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

Dataset singles_from_csv(const std::string& path) {
  ExperimentConfig cfg;
  cfg.data.kind = DataSource::Kind::csv;
  cfg.data.path = path;
  LoadReport report;
  auto singles = load_singles(cfg, &report);
  if (!report.excluded_ids.empty())
    std::cerr << report.excluded_ids.size() << " samples failed the housekeeping filter\n";
  return singles;
}

HypothesisPair hypotheses(const LrSystem& model, const std::string& interest, const std::string& present,
                          const std::string& absent) {
  HypothesisPair hp;
  if (!interest.empty()) {
    hp.interest = parse_set(interest);
  } else if (model.calibrators.size() == 1) {
    hp.interest = model.calibrators.begin()->first;
  } else {
    throw ConfigError("the model covers several interest sets; pass --interest");
  }
  if (!present.empty()) hp.fixed_present = parse_set(present);
  if (!absent.empty()) hp.fixed_absent = parse_set(absent);
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return hp;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood ratios for body fluid mixtures from mRNA profiles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kServerVersion));

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize single-source profiles from detection rates");
  std::string rates = "table1", synth_out;
  std::uint64_t synth_seed = 0;
  std::size_t n_per_fluid = 30, reps = 4;
  synth->add_option("--rates", rates, "Rate CSV, or 'table1' for the built-in reference rates");
  synth->add_option("--out", synth_out, "Output profile CSV")->required();
  synth->add_option("--seed", synth_seed, "Seed")->required();
  synth->add_option("--n-per-fluid", n_per_fluid, "Samples per fluid");
  synth->add_option("--reps", reps, "Replicates per sample")->check(CLI::Range(2, 4));

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a seeded experiment grid");
  std::string config_path, experiment_out;
  unsigned threads = 0;
  experiment->add_option("--config", config_path, "TOML config")->required();
  experiment->add_option("--out", experiment_out, "Report directory")->required();
  experiment->add_option("--threads", threads, "Worker threads (0: all cores)");

  // train
  auto* train = app.add_subcommand("train", "Train and calibrate one LR system");
  std::string data_path, train_interest, strategy = "one_vs_rest", mode, train_out;
  std::vector<std::string> background;
  std::uint64_t train_seed = 0;
  bool dichotomize = false, no_dichotomize = false;
  double lambda = TrainingConfig{}.lambda;
  train->add_option("--data", data_path, "Single-source profile CSV")->required();
  train->add_option("--interest", train_interest, "Fluids of interest, e.g. vaginal_mucosa,menstrual_secretion")
      ->required();
  train->add_option("--strategy", strategy, "one-vs-rest or power-set");
  train->add_flag("--dichotomize", dichotomize, "Binarize each replicate (default)");
  train->add_flag("--no-dichotomize", no_dichotomize, "Use mean rfu");
  train->add_option("--mode", mode, "Dichotomization: off, per_replicate, after_mean");
  train->add_option("--background", background, "fluid=level overrides")->delimiter(',');
  train->add_option("--seed", train_seed, "Seed")->required();
  train->add_option("--lambda", lambda, "L2 strength");
  train->add_option("--out", train_out, "Model JSON")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a case with a trained model");
  std::string model_path, case_path, eval_interest, fixed_present, fixed_absent, format = "json";
  double cap = kDefaultLrCap;
  evaluate->add_option("--model", model_path, "Model JSON")->required();
  evaluate->add_option("--case", case_path, "Case JSON")->required();
  evaluate->add_option("--interest", eval_interest, "Fluids of interest (default: the model's only set)");
  evaluate->add_option("--fixed-present", fixed_present, "Fluids agreed to be present");
  evaluate->add_option("--fixed-absent", fixed_absent, "Fluids agreed to be absent");
  evaluate->add_option("--cap", cap, "LR cap");
  evaluate->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));

  // compare
  auto* compare = app.add_subcommand("compare", "Cross-tabulate the n/2 rule against LR conclusions");
  std::vector<std::string> case_paths;
  compare->add_option("--model", model_path, "Model JSON")->required();
  compare->add_option("--case", case_paths, "Case JSON files")->required();
  compare->add_option("--interest", eval_interest, "Fluids of interest");
  compare->add_option("--cap", cap, "LR cap");

  // sensitivity
  auto* sensitivity = app.add_subcommand("sensitivity", "Retrain with one background level shifted");
  std::string fluid_name, sensitivity_out;
  double level = 0.9;
  sensitivity->add_option("--config", config_path, "TOML config")->required();
  sensitivity->add_option("--fluid", fluid_name, "Background fluid to shift")->required();
  sensitivity->add_option("--level", level, "New background level");
  sensitivity->add_option("--out", sensitivity_out, "Directory for sensitivity.csv and sensitivity.json");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string model_dir, host = "127.0.0.1", static_dir, serve_data;
  int port = 8080;
  bool allow_training = false;
  std::uint64_t serve_seed = 0;
  serve->add_option("--model-dir", model_dir, "Model directory (default: $MIXLR_MODEL_DIR)");
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--static", static_dir, "Directory of static UI assets");
  serve->add_flag("--allow-training", allow_training, "Train missing variants on demand");
  serve->add_option("--data", serve_data, "Single-source profile CSV for on-demand training");
  serve->add_option("--seed", serve_seed, "Seed for on-demand training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) {
      const auto panel = MarkerPanel::standard();
      const RateTable table = rates == "table1" ? reference_detection_rates() : parse_rate_table(io::read_file(rates), panel);
      SynthesisOptions opts;
      opts.n_per_fluid = n_per_fluid;
      opts.reps_per_sample = reps;
      opts.seed = synth_seed;
      io::write_file(synth_out, write_profile_table(synthesize_dataset(table, panel, opts)));
    } else if (*experiment) {
      auto cfg = load_experiment_config(config_path);
      if (experiment->count("--threads")) cfg.threads = threads;
      const auto report = run_experiment(cfg);
      write_report(report, experiment_out);
      for (const auto& s : report.cllr_summary())
        std::cout << to_string(s.strategy) << " " << to_string(s.mode) << " " << s.interest.to_string()
                  << ": median Cllr " << s.median << " over " << s.runs << " runs\n";
    } else if (*train) {
      SystemSpec spec;
      spec.strategy = parse_strategy(strategy);
      if (dichotomize && no_dichotomize) throw ConfigError("--dichotomize and --no-dichotomize conflict");
      spec.mode = !mode.empty()      ? parse_dichotomization(mode)
                  : no_dichotomize ? Dichotomization::off
                                   : Dichotomization::per_replicate;
      spec.background = parse_background(background);
      spec.interest_sets = {parse_set(train_interest)};
      spec.training.lambda = lambda;
      spec.training.validate();
      TrainingRecipe recipe;
      recipe.seed = train_seed;
      const auto trained = train_system(singles_from_csv(data_path), spec, recipe);
      io::save_model_file(trained.system, train_out);
      for (const auto& [interest, m] : trained.test_metrics)
        std::cout << trained.system.variant_id() << ": test Cllr " << m.cllr << ", AUC " << m.auc << "\n";
    } else if (*evaluate) {
      const auto model = io::load_model_file(model_path);
      const auto hp = hypotheses(model, eval_interest, fixed_present, fixed_absent);
      const auto obs = io::case_from_json(io::parse(io::read_file(case_path)), model.panel);
      CaseOptions options;
      options.cap = cap;
      const auto report = evaluate_case(model, obs, hp, options);
      if (format == "text")
        std::cout << report.to_text();
      else
        std::cout << io::to_json(report).dump(2) << "\n";
    } else if (*compare) {
      const auto model = io::load_model_file(model_path);
      const auto hp = hypotheses(model, eval_interest, {}, {});
      std::vector<CaseObservation> cases;
      for (const auto& p : case_paths) cases.push_back(io::case_from_json(io::parse(io::read_file(p)), model.panel));
      CaseOptions options;
      options.cap = cap;
      std::cout << compare_with_n_over_2(model, cases, hp, options).to_csv();
    } else if (*sensitivity) {
      const auto cfg = load_experiment_config(config_path);
      const auto fluid = try_parse_fluid(fluid_name);
      if (!fluid) throw ConfigError("unknown fluid '" + fluid_name + "'");
      const auto result = sensitivity_analysis(cfg, *fluid, level);
      const auto summary = sensitivity_json(result, config_hash(cfg));
      if (!sensitivity_out.empty()) {
        std::filesystem::create_directories(sensitivity_out);
        io::write_file((std::filesystem::path(sensitivity_out) / "sensitivity.csv").string(), sensitivity_csv(result));
        io::write_file((std::filesystem::path(sensitivity_out) / "sensitivity.json").string(), summary.dump(2) + "\n");
      }
      std::cout << summary.dump(2) << "\n";
    } else if (*serve) {
      if (model_dir.empty())
        if (const char* env = std::getenv("MIXLR_MODEL_DIR")) model_dir = env;
      if (model_dir.empty()) throw ConfigError("no model directory: pass --model-dir or set MIXLR_MODEL_DIR");
      std::shared_ptr<ModelStore> store = ModelStore::load_directory(model_dir);
      if (allow_training) {
        if (serve_data.empty()) throw ConfigError("--allow-training needs --data");
        TrainingSource source{singles_from_csv(serve_data), {}, {}};
        source.recipe.seed = serve_seed;
        store->enable_training(std::move(source));
      }
      auto service = std::make_shared<Service>(store);
      HttpServer server(service, static_dir);
      const int bound = server.bind(host, port);
      std::cerr << "serving " << store->variant_ids().size() << " models on http://" << host << ":" << bound << "\n";
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
