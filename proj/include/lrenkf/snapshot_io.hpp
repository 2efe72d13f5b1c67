/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>

#include "lrenkf/snapshot.hpp"

namespace lrenkf {

// SNP1 layout, little-endian throughout:
//   "SNP1" | u32 version=1 | u32 n_comp | u32 n_x | u32 n_y | u32 n_z | u32 n_t | f64 dt
//   followed by n_t columns of J f64 values each.
inline constexpr char kSnapshotMagic[4] = {'S', 'N', 'P', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 4 + 6 * 4 + 8;

void write_snapshots(std::ostream& out, const SnapshotMatrix& snapshots);
void write_snapshots(const std::filesystem::path& path, const SnapshotMatrix& snapshots);

/// Throws FormatError on bad magic, unsupported version, truncated or oversized payload.
SnapshotMatrix read_snapshots(std::istream& in);
SnapshotMatrix read_snapshots(const std::filesystem::path& path);

/// Writes an SNP1 file one column at a time, so a field never has to be held
/// in memory as a whole.
class SnapshotWriter {
 public:
  SnapshotWriter(const std::filesystem::path& path, const FieldMeta& meta);
  ~SnapshotWriter();

  SnapshotWriter(const SnapshotWriter&) = delete;
  SnapshotWriter& operator=(const SnapshotWriter&) = delete;

  void write_column(const Eigen::Ref<const Eigen::VectorXd>& column);
  /// Throws FormatError if fewer than n_t columns were written.
  void close();

 private:
  std::ofstream out_;
  FieldMeta meta_;
  Index written_ = 0;
  bool closed_ = false;
};

}  // namespace lrenkf
