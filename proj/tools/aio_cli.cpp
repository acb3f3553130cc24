// Command-line front end for the airflow-inertial odometry pipeline.
// Exit codes: 0 success, 1 usage error, 2 bad configuration, 3 runtime
// failure.
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aio/cli/pipeline.hpp"

namespace {

struct Args {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> stages;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

int dispatch(const std::string& command, const Args& args) {
  aio::io::PipelineConfig cfg;
  try {
    std::ifstream in(args.config_path);
    if (!in) {
      std::fprintf(stderr, "config error: cannot open %s\n",
                   args.config_path.c_str());
      return 2;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (args.seed_set) {
      // Patch the root seed before parsing so derived stage seeds follow it.
      auto j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded()) {
        std::fprintf(stderr, "config error: %s is not valid JSON\n",
                     args.config_path.c_str());
        return 2;
      }
      j["seed"] = args.seed;
      text = j.dump();
    }
    cfg = aio::io::parse_pipeline_config(text);
  } catch (const aio::io::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  aio::cli::Paths paths{args.out_dir};
  try {
    if (command == "simulate") aio::cli::cmd_simulate(cfg, paths);
    else if (command == "train-airflow") aio::cli::cmd_train_airflow(cfg, paths);
    else if (command == "estimate-wind") aio::cli::cmd_estimate_wind(cfg, paths);
    else if (command == "fit-map") aio::cli::cmd_fit_map(cfg, paths);
    else if (command == "run-filter") aio::cli::cmd_run_filter(cfg, paths);
    else if (command == "evaluate") aio::cli::cmd_evaluate(cfg, paths);
    else if (command == "run") aio::cli::run_pipeline(cfg, paths, args.stages);
    return 0;
  } catch (const aio::io::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Airflow-inertial odometry pipeline"};
  app.require_subcommand(1);

  Args args;
  std::string active;
  auto add_common = [&](CLI::App* sub, bool with_stage) {
    sub->add_option("--config", args.config_path, "Pipeline config (JSON)")
        ->required();
    sub->add_option("--out", args.out_dir, "Output directory");
    sub->add_option("--seed", args.seed, "Override the config's root seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    if (with_stage)
      sub->add_option("--stage", args.stages,
                      "Run only the named stage(s), in the given order");
    sub->callback([&, name = sub->get_name()] { active = name; });
  };

  for (const char* name : {"simulate", "train-airflow", "estimate-wind",
                           "fit-map", "run-filter", "evaluate"})
    add_common(app.add_subcommand(name), false);
  add_common(app.add_subcommand("run", "Execute the full pipeline"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return dispatch(active, args);
}
