// Pipeline stages behind the command-line tool. Every stage reads its inputs
// from (and writes its outputs under) a single output directory, and records
// a manifest with the configuration echo so artifacts are reproducible.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "aio/io/config.hpp"

namespace aio::cli {

/// A required input artifact is missing or unreadable, or a stage failed at
/// runtime. Distinct from io::ConfigError (bad configuration).
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Paths {
  std::string out;

  std::string log_csv(const std::string& dataset) const;
  std::string model_json() const;
  std::string wind_estimates_csv() const;
  std::string map_json() const;
  std::string map_grid_csv() const;
  std::string estimate_csv(const std::string& mode) const;
  std::string results_csv() const;
  std::string aggregate_json() const;
  std::string manifest_json(const std::string& stage) const;
};

void cmd_simulate(const io::PipelineConfig& cfg, const Paths& paths);
void cmd_train_airflow(const io::PipelineConfig& cfg, const Paths& paths);
void cmd_estimate_wind(const io::PipelineConfig& cfg, const Paths& paths);
void cmd_fit_map(const io::PipelineConfig& cfg, const Paths& paths);
void cmd_run_filter(const io::PipelineConfig& cfg, const Paths& paths);
void cmd_evaluate(const io::PipelineConfig& cfg, const Paths& paths);

/// Runs the stages in dependency order. An empty stage list means every stage
/// the configuration enables (mapping stages are skipped without a mapping
/// dataset, training without training datasets).
void run_pipeline(const io::PipelineConfig& cfg, const Paths& paths,
                  const std::vector<std::string>& stages = {});

std::vector<std::string> pipeline_stage_names();

// Wind-estimate table ((position, wind) pairs at the map-fitting rate).
struct WindEstimateRow {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};
void write_wind_estimates_csv(const std::vector<WindEstimateRow>& rows,
                              double sample_hz, const std::string& path);
std::vector<WindEstimateRow> read_wind_estimates_csv(const std::string& path,
                                                     double* sample_hz);

}  // namespace aio::cli
