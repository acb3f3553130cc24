#include "aio/airflow/estimator.hpp"

#include <cmath>

#include "aio/airflow/train.hpp"

namespace aio::airflow {

std::vector<AirflowMeasurement> estimate_airflow(const LstmRegressor& model,
                                                 const sim::SensorLog& log) {
  std::vector<AirflowMeasurement> out;
  const int stride = std::max(1, static_cast<int>(std::llround(log.rate_hz / kAirflowInputHz)));
  const int emit_every = std::max(1, static_cast<int>(std::llround(kAirflowInputHz / kAirflowOutputHz)));
  const std::size_t span = static_cast<std::size_t>(stride) * (kSeqLen - 1);

  long input_count = 0;
  for (std::size_t row = 0; row < log.rows.size(); row += stride) {
    ++input_count;
    if (row < span) continue;
    if ((input_count - 1) % emit_every != 0) continue;
    Window w;
    for (int s = 0; s < kSeqLen; ++s) {
      const sim::SensorRow& r = log.rows[row - span + s * stride];
      w.row(s).segment(0, 8) = r.whisker.transpose();
      w.row(s).segment(8, 3) = r.gyro.transpose();
      w.row(s).segment(11, 3) = r.accel.transpose();
      w.row(s).segment(14, 6) = r.throttle.transpose();
    }
    AirflowMeasurement m;
    m.t = log.rows[row].t;
    m.row_index = row;
    m.v_inf = model.forward(w);
    m.cov = model.sigma_lstm;
    out.push_back(m);
  }
  return out;
}

}  // namespace aio::airflow
