// 25 Hz relative-airflow measurement stream produced from the latest 5-sample
// window of the 50 Hz sensor inputs.
#pragma once

#include "aio/airflow/lstm.hpp"
#include "aio/sim/sensor_log.hpp"

namespace aio::airflow {

inline constexpr double kAirflowOutputHz = 25.0;

struct AirflowMeasurement {
  double t = 0.0;
  std::size_t row_index = 0;  // log row the window ends at
  Vec3 v_inf = Vec3::Zero();  // body frame
  Mat3 cov = Mat3::Identity();
};

/// Runs the regressor over the log. No emissions until 5 input samples have
/// accumulated (warm-up); afterwards one prediction per 1/25 s.
std::vector<AirflowMeasurement> estimate_airflow(const LstmRegressor& model,
                                                 const sim::SensorLog& log);

}  // namespace aio::airflow
