/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace lrenkf {

using Index = Eigen::Index;

/// Grid and sampling description of a spatio-temporal field.
///
/// A snapshot column stacks the components one after the other; inside a
/// component the points run x-major, then y, then z.
struct FieldMeta {
  Index n_comp = 1;
  Index n_x = 1;
  Index n_y = 1;
  Index n_z = 1;
  Index n_t = 1;
  double dt = 1.0;

  /// Grid points per component (n_x * n_y * n_z).
  Index points() const { return n_x * n_y * n_z; }
  /// Length J of one snapshot column.
  Index state_size() const { return n_comp * points(); }
  /// Row of component `comp` at grid point (ix, iy, iz).
  Index flat_index(Index comp, Index ix, Index iy, Index iz) const;

  /// Throws ValueError unless every count is >= 1 and dt is finite and > 0.
  void validate() const;

  bool operator==(const FieldMeta&) const = default;
};

/// J x K matrix whose column k is the flattened field at time k.
class SnapshotMatrix {
 public:
  /// Throws ShapeError if `data` is not J x n_t, ValueError on non-finite entries.
  SnapshotMatrix(FieldMeta meta, Eigen::MatrixXd data);

  const FieldMeta& meta() const { return meta_; }
  const Eigen::MatrixXd& data() const { return data_; }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }

 private:
  FieldMeta meta_;
  Eigen::MatrixXd data_;
};

/// Strictly increasing selection of rows out of a J-dimensional state.
class SensorSet {
 public:
  SensorSet(std::vector<Index> indices, Index source_size);

  /// Every row of a J-dimensional state.
  static SensorSet full(Index source_size);

  const std::vector<Index>& indices() const { return indices_; }
  Index size() const { return static_cast<Index>(indices_.size()); }
  Index source_size() const { return source_size_; }
  Index operator[](Index i) const { return indices_[static_cast<std::size_t>(i)]; }
  bool is_full() const { return size() == source_size_; }

  /// Rows of `state` picked by this set.
  Eigen::VectorXd select(const Eigen::Ref<const Eigen::VectorXd>& state) const;

  bool operator==(const SensorSet&) const = default;

 private:
  std::vector<Index> indices_;
  Index source_size_;
};

/// Spatially and temporally sub-sampled snapshot matrix.
struct ReducedSnapshotMatrix {
  FieldMeta parent_meta;
  SensorSet sensors;
  Index time_stride = 1;
  Eigen::MatrixXd data;

  /// Throws ShapeError when rows/columns disagree with `sensors` and the stride.
  void validate() const;
};

/// Per-time, per-component field arrays: fields[k][c] holds n_x*n_y*n_z values.
using FieldSequence = std::vector<std::vector<std::vector<double>>>;

SnapshotMatrix assemble_snapshot_matrix(const FieldSequence& fields, const FieldMeta& meta);

/// Inverse of assemble_snapshot_matrix.
FieldSequence disassemble_snapshot_matrix(const SnapshotMatrix& snapshots);

/// `count` indices floor(i * J / count), i = 0 .. count-1.
SensorSet uniform_sensor_set(Index state_size, Index count);

/// Number of columns kept when every `time_stride`-th snapshot is retained.
Index strided_count(Index n_t, Index time_stride);

ReducedSnapshotMatrix extract(const SnapshotMatrix& snapshots, const SensorSet& sensors,
                              Index time_stride = 1);

/// Rows/columns selection on a bare matrix, shared by `extract`.
Eigen::MatrixXd extract_rows(const Eigen::MatrixXd& data, const SensorSet& sensors,
                             Index time_stride = 1);

/// J / n_s.
double compression_rate(Index state_size, Index sensor_count);

/// Sensor count that realizes a target compression rate: round(J / rate), clamped to [1, J].
Index sensor_count_for_rate(Index state_size, double rate);

}  // namespace lrenkf
