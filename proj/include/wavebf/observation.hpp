#pragma once

// Sensor geometry (the observation operator C), synthetic data recording
// and additive Gaussian noise.

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wavebf/errors.hpp"
#include "wavebf/format.hpp"
#include "wavebf/wave_core.hpp"

namespace wavebf {

/// Pointwise sensors at interior nodes {0, d, 2d, ...} (d = delta_data),
/// counted from the first interior node.
struct SensorArray {
  std::vector<int> indices;
  int delta_data = 1;

  int count() const { return static_cast<int>(indices.size()); }
};

inline SensorArray build_sensor_array(const GridSpec& grid, int delta_data) {
  if (delta_data < 1) throw ParameterError("build_sensor_array: delta_data must be >= 1");
  grid.validate();
  SensorArray s;
  s.delta_data = delta_data;
  for (int i = 0; i < grid.n_interior; i += delta_data) s.indices.push_back(i);
  return s;
}

inline Vector gather(const Vector& p, const SensorArray& sensors) {
  Vector out(sensors.count());
  for (int j = 0; j < sensors.count(); ++j) {
    const int i = sensors.indices[static_cast<std::size_t>(j)];
    if (i < 0 || i >= p.size()) {
      throw DimensionError("sensor index " + std::to_string(i) + " out of range");
    }
    out(j) = p(i);
  }
  return out;
}

/// C^*: scatters sensor values onto a zero grid vector.
inline Vector scatter(const Vector& values, const SensorArray& sensors, int n) {
  if (values.size() != sensors.count()) throw DimensionError("scatter: length mismatch");
  Vector out = Vector::Zero(n);
  for (int j = 0; j < sensors.count(); ++j) {
    const int i = sensors.indices[static_cast<std::size_t>(j)];
    if (i < 0 || i >= n) throw DimensionError("sensor index " + std::to_string(i) + " out of range");
    out(i) += values(j);
  }
  return out;
}

/// p_curr restricted to the sensors.
inline Vector observe(const WaveState& state, const SensorArray& sensors) {
  return gather(state.p_curr, sensors);
}

struct NoiseSpec {
  double level = 0.0;  // nu as a fraction, 0.30 for 30%
  std::uint64_t seed = 0;
};

/// Sensor readings of p at every stored time level; row k is level k.
struct ObservationRecord {
  Matrix samples;  // (n_steps + 1) x m
  double delta_t = 1.0 / 200.0;
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  int n_levels() const { return static_cast<int>(samples.rows()); }
  int n_sensors() const { return static_cast<int>(samples.cols()); }
  Vector level(int k) const { return samples.row(k).transpose(); }

  double rms() const {
    return samples.size() == 0 ? 0.0 : std::sqrt(samples.squaredNorm() / samples.size());
  }
};

/// Adds i.i.d. N(0, sigma^2) noise with sigma = level * RMS(record).
inline ObservationRecord add_noise(const ObservationRecord& record, const NoiseSpec& noise) {
  if (!(noise.level >= 0.0)) throw ParameterError("add_noise: noise level must be >= 0");
  ObservationRecord out = record;
  out.noise_level = noise.level;
  out.seed = noise.seed;
  if (noise.level == 0.0) return out;
  const double sigma = noise.level * record.rms();
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Row-major traversal keeps the draw order independent of storage order.
  for (Eigen::Index k = 0; k < out.samples.rows(); ++k) {
    for (Eigen::Index j = 0; j < out.samples.cols(); ++j) {
      out.samples(k, j) += sigma * normal(rng);
    }
  }
  return out;
}

/// Runs the model from rest at f0 (no feedback) and samples every level.
/// Data come from the unattenuated model unless `attenuated` is set.
inline ObservationRecord record_run(const Phantom& phantom, const GridSpec& grid,
                                    const SchemeParams& params, const SensorArray& sensors,
                                    const std::optional<NoiseSpec>& noise = std::nullopt,
                                    bool attenuated = false) {
  if (phantom.values.size() != grid.n_interior) {
    throw DimensionError("record_run: phantom length does not match n_interior");
  }
  if (noise && !(noise->level >= 0.0)) {
    throw ParameterError("record_run: noise level must be >= 0");
  }
  SchemeParams truth_params = params;
  if (!attenuated) truth_params.attenuation_alpha.reset();
  truth_params.validate(grid);

  ObservationRecord rec;
  rec.delta_t = params.delta_t;
  rec.samples.resize(params.n_steps + 1, sensors.count());
  propagate_streaming(WaveState::at_rest(phantom.values), grid, truth_params, Direction::forward,
                      {}, [&](const WaveState& s) {
                        rec.samples.row(s.step_index) = observe(s, sensors).transpose();
                      });
  if (noise) return add_noise(rec, *noise);
  return rec;
}

/// CSV with header `step,t,s0,s1,...`, one row per time level.
inline void write_record_csv(std::ostream& os, const ObservationRecord& record) {
  os << "step,t";
  for (int j = 0; j < record.n_sensors(); ++j) os << ",s" << j;
  os << '\n';
  for (int k = 0; k < record.n_levels(); ++k) {
    os << k << ',' << format_real(k * record.delta_t);
    for (int j = 0; j < record.n_sensors(); ++j) os << ',' << format_real(record.samples(k, j));
    os << '\n';
  }
}

inline ObservationRecord read_record_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("record CSV: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.emplace_back(trim(cell));
  }
  if (header.size() < 2 || header[0] != "step" || header[1] != "t") {
    throw IoError("record CSV: header must start with 'step,t'");
  }
  const std::size_t m = header.size() - 2;
  std::vector<std::vector<double>> rows;
  std::vector<double> times;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (!parse_real(trim(cell), v)) throw IoError("record CSV: malformed number '" + cell + "'");
      values.push_back(v);
    }
    if (values.size() != m + 2) throw IoError("record CSV: wrong number of columns");
    if (static_cast<std::size_t>(values[0]) != rows.size()) {
      throw IoError("record CSV: steps must be consecutive from 0");
    }
    times.push_back(values[1]);
    rows.emplace_back(values.begin() + 2, values.end());
  }
  ObservationRecord rec;
  rec.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      rec.samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[k][j];
    }
  }
  if (times.size() >= 2) rec.delta_t = times[1] - times[0];
  return rec;
}

}  // namespace wavebf
