/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "lrenkf/error.hpp"

namespace lrenkf {

Index FieldMeta::flat_index(Index comp, Index ix, Index iy, Index iz) const {
  if (comp < 0 || comp >= n_comp || ix < 0 || ix >= n_x || iy < 0 || iy >= n_y || iz < 0 ||
      iz >= n_z) {
    throw ValueError(fmt::format("grid point ({}, {}, {}, {}) outside a {}x{}x{}x{} field", comp,
                                 ix, iy, iz, n_comp, n_x, n_y, n_z));
  }
  return comp * points() + (ix * n_y + iy) * n_z + iz;
}

void FieldMeta::validate() const {
  if (n_comp < 1 || n_x < 1 || n_y < 1 || n_z < 1 || n_t < 1) {
    throw ValueError(fmt::format("field counts must be >= 1 (n_comp={}, n_x={}, n_y={}, n_z={}, "
                                 "n_t={})",
                                 n_comp, n_x, n_y, n_z, n_t));
  }
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw ValueError(fmt::format("dt must be finite and positive, got {}", dt));
  }
}

SnapshotMatrix::SnapshotMatrix(FieldMeta meta, Eigen::MatrixXd data)
    : meta_(meta), data_(std::move(data)) {
  meta_.validate();
  if (data_.rows() != meta_.state_size() || data_.cols() != meta_.n_t) {
    throw ShapeError(fmt::format("snapshot data is {}x{}, metadata requires {}x{}", data_.rows(),
                                 data_.cols(), meta_.state_size(), meta_.n_t));
  }
  for (Index k = 0; k < data_.cols(); ++k) {
    for (Index j = 0; j < data_.rows(); ++j) {
      if (!std::isfinite(data_(j, k))) {
        throw ValueError(fmt::format("non-finite snapshot entry at row {}, column {}", j, k));
      }
    }
  }
}

SensorSet::SensorSet(std::vector<Index> indices, Index source_size)
    : indices_(std::move(indices)), source_size_(source_size) {
  if (indices_.empty() || static_cast<Index>(indices_.size()) > source_size_) {
    throw ValueError(fmt::format("sensor count {} must lie in [1, {}]", indices_.size(),
                                 source_size_));
  }
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0 || indices_[i] >= source_size_) {
      throw ValueError(fmt::format("sensor index {} outside [0, {})", indices_[i], source_size_));
    }
    if (i > 0 && indices_[i] <= indices_[i - 1]) {
      throw ValueError(fmt::format("sensor indices must be strictly increasing ({} after {})",
                                   indices_[i], indices_[i - 1]));
    }
  }
}

SensorSet SensorSet::full(Index source_size) {
  std::vector<Index> all(static_cast<std::size_t>(source_size));
  for (Index i = 0; i < source_size; ++i) all[static_cast<std::size_t>(i)] = i;
  return SensorSet(std::move(all), source_size);
}

Eigen::VectorXd SensorSet::select(const Eigen::Ref<const Eigen::VectorXd>& state) const {
  if (state.size() != source_size_) {
    throw ShapeError(fmt::format("state has {} rows, sensors index {}", state.size(),
                                 source_size_));
  }
  Eigen::VectorXd out(size());
  for (Index i = 0; i < size(); ++i) out(i) = state((*this)[i]);
  return out;
}

void ReducedSnapshotMatrix::validate() const {
  if (sensors.source_size() != parent_meta.state_size()) {
    throw ShapeError(fmt::format("sensors index a {}-row state, parent field has J={}",
                                 sensors.source_size(), parent_meta.state_size()));
  }
  if (time_stride < 1) throw ValueError("time stride must be >= 1");
  if (data.rows() != sensors.size() || data.cols() != strided_count(parent_meta.n_t, time_stride)) {
    throw ShapeError(fmt::format("reduced data is {}x{}, expected {}x{}", data.rows(), data.cols(),
                                 sensors.size(), strided_count(parent_meta.n_t, time_stride)));
  }
}

SnapshotMatrix assemble_snapshot_matrix(const FieldSequence& fields, const FieldMeta& meta) {
  meta.validate();
  if (static_cast<Index>(fields.size()) != meta.n_t) {
    throw ShapeError(fmt::format("{} time entries supplied, metadata expects {}", fields.size(),
                                 meta.n_t));
  }
  const Index points = meta.points();
  Eigen::MatrixXd data(meta.state_size(), meta.n_t);
  for (Index k = 0; k < meta.n_t; ++k) {
    const auto& at_time = fields[static_cast<std::size_t>(k)];
    if (static_cast<Index>(at_time.size()) != meta.n_comp) {
      throw ShapeError(fmt::format("time {} supplies {} components, expected {}", k,
                                   at_time.size(), meta.n_comp));
    }
    for (Index c = 0; c < meta.n_comp; ++c) {
      const auto& values = at_time[static_cast<std::size_t>(c)];
      if (static_cast<Index>(values.size()) != points) {
        throw ShapeError(fmt::format("time {} component {} has {} values, expected {}", k, c,
                                     values.size(), points));
      }
      for (Index p = 0; p < points; ++p) {
        const double v = values[static_cast<std::size_t>(p)];
        if (!std::isfinite(v)) {
          throw ValueError(fmt::format("non-finite value at time {}, component {}, point {}", k,
                                       c, p));
        }
        data(c * points + p, k) = v;
      }
    }
  }
  return SnapshotMatrix(meta, std::move(data));
}

FieldSequence disassemble_snapshot_matrix(const SnapshotMatrix& snapshots) {
  const FieldMeta& meta = snapshots.meta();
  const Index points = meta.points();
  FieldSequence fields(static_cast<std::size_t>(meta.n_t));
  for (Index k = 0; k < meta.n_t; ++k) {
    auto& at_time = fields[static_cast<std::size_t>(k)];
    at_time.resize(static_cast<std::size_t>(meta.n_comp));
    for (Index c = 0; c < meta.n_comp; ++c) {
      auto& values = at_time[static_cast<std::size_t>(c)];
      values.resize(static_cast<std::size_t>(points));
      for (Index p = 0; p < points; ++p) {
        values[static_cast<std::size_t>(p)] = snapshots.data()(c * points + p, k);
      }
    }
  }
  return fields;
}

SensorSet uniform_sensor_set(Index state_size, Index count) {
  if (count < 1 || count > state_size) {
    throw ValueError(fmt::format("sensor count {} must lie in [1, {}]", count, state_size));
  }
  std::vector<Index> indices(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    // i * J fits comfortably in 64 bits for any realistic grid.
    indices[static_cast<std::size_t>(i)] = (i * state_size) / count;
  }
  return SensorSet(std::move(indices), state_size);
}

Index strided_count(Index n_t, Index time_stride) {
  if (time_stride < 1) throw ValueError("time stride must be >= 1");
  return (n_t + time_stride - 1) / time_stride;
}

Eigen::MatrixXd extract_rows(const Eigen::MatrixXd& data, const SensorSet& sensors,
                             Index time_stride) {
  if (sensors.source_size() != data.rows()) {
    throw ShapeError(fmt::format("sensors index a {}-row state, matrix has {} rows",
                                 sensors.source_size(), data.rows()));
  }
  const Index kept = strided_count(data.cols(), time_stride);
  Eigen::MatrixXd out(sensors.size(), kept);
  for (Index k = 0; k < kept; ++k) {
    const Index src = k * time_stride;
    for (Index i = 0; i < sensors.size(); ++i) out(i, k) = data(sensors[i], src);
  }
  return out;
}

ReducedSnapshotMatrix extract(const SnapshotMatrix& snapshots, const SensorSet& sensors,
                              Index time_stride) {
  ReducedSnapshotMatrix reduced{snapshots.meta(), sensors, time_stride,
                                extract_rows(snapshots.data(), sensors, time_stride)};
  return reduced;
}

double compression_rate(Index state_size, Index sensor_count) {
  if (sensor_count < 1) throw ValueError("compression rate needs at least one sensor");
  return static_cast<double>(state_size) / static_cast<double>(sensor_count);
}

Index sensor_count_for_rate(Index state_size, double rate) {
  if (!std::isfinite(rate) || rate < 1.0) {
    throw ValueError(fmt::format("compression rate must be >= 1, got {}", rate));
  }
  const auto count = static_cast<Index>(std::llround(static_cast<double>(state_size) / rate));
  return std::clamp<Index>(count, 1, state_size);
}

}  // namespace lrenkf
