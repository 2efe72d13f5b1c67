/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/snapshot_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <vector>

#include <fmt/format.h>

#include "lrenkf/error.hpp"

namespace lrenkf {
namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) {
    throw FormatError(fmt::format("truncated SNP1 header while reading {}", what));
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::uint32_t checked_u32(Index value, const char* what) {
  if (value < 1 || value > static_cast<Index>(std::numeric_limits<std::uint32_t>::max())) {
    throw FormatError(fmt::format("{}={} does not fit the SNP1 u32 field", what, value));
  }
  return static_cast<std::uint32_t>(value);
}

void write_header(std::ostream& out, const FieldMeta& meta) {
  out.write(kSnapshotMagic, 4);
  put_le<std::uint32_t>(out, kSnapshotVersion);
  put_le<std::uint32_t>(out, checked_u32(meta.n_comp, "n_comp"));
  put_le<std::uint32_t>(out, checked_u32(meta.n_x, "n_x"));
  put_le<std::uint32_t>(out, checked_u32(meta.n_y, "n_y"));
  put_le<std::uint32_t>(out, checked_u32(meta.n_z, "n_z"));
  put_le<std::uint32_t>(out, checked_u32(meta.n_t, "n_t"));
  put_le<double>(out, meta.dt);
}

void write_column_le(std::ostream& out, const double* values, Index count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values),
              static_cast<std::streamsize>(count * static_cast<Index>(sizeof(double))));
  } else {
    for (Index j = 0; j < count; ++j) put_le<double>(out, values[j]);
  }
}

}  // namespace

void write_snapshots(std::ostream& out, const SnapshotMatrix& snapshots) {
  write_header(out, snapshots.meta());
  const Eigen::MatrixXd& data = snapshots.data();
  // Eigen storage is column-major, so each snapshot column is contiguous.
  for (Index k = 0; k < data.cols(); ++k) write_column_le(out, data.col(k).data(), data.rows());
  if (!out) throw FormatError("failed writing SNP1 stream");
}

void write_snapshots(const std::filesystem::path& path, const SnapshotMatrix& snapshots) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot open {} for writing", path.string()));
  write_snapshots(out, snapshots);
}

SnapshotMatrix read_snapshots(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("truncated SNP1 header while reading magic");
  if (std::memcmp(magic, kSnapshotMagic, 4) != 0) throw FormatError("bad SNP1 magic");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kSnapshotVersion) {
    throw FormatError(fmt::format("unsupported SNP1 version {}", version));
  }
  FieldMeta meta;
  meta.n_comp = get_le<std::uint32_t>(in, "n_comp");
  meta.n_x = get_le<std::uint32_t>(in, "n_x");
  meta.n_y = get_le<std::uint32_t>(in, "n_y");
  meta.n_z = get_le<std::uint32_t>(in, "n_z");
  meta.n_t = get_le<std::uint32_t>(in, "n_t");
  meta.dt = get_le<double>(in, "dt");
  try {
    meta.validate();
  } catch (const ValueError& e) {
    throw FormatError(fmt::format("invalid SNP1 header: {}", e.what()));
  }

  Eigen::MatrixXd data(meta.state_size(), meta.n_t);
  const auto column_bytes = static_cast<std::streamsize>(meta.state_size() * 8);
  for (Index k = 0; k < meta.n_t; ++k) {
    double* column = data.col(k).data();
    if constexpr (std::endian::native == std::endian::little) {
      in.read(reinterpret_cast<char*>(column), column_bytes);
      if (in.gcount() != column_bytes) {
        throw FormatError(fmt::format("truncated SNP1 payload in snapshot {} of {}", k, meta.n_t));
      }
    } else {
      for (Index j = 0; j < meta.state_size(); ++j) column[j] = get_le<double>(in, "payload");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after SNP1 payload");
  }
  try {
    return SnapshotMatrix(meta, std::move(data));
  } catch (const Error& e) {
    throw FormatError(fmt::format("invalid SNP1 payload: {}", e.what()));
  }
}

SnapshotMatrix read_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  return read_snapshots(in);
}

SnapshotWriter::SnapshotWriter(const std::filesystem::path& path, const FieldMeta& meta)
    : out_(path, std::ios::binary | std::ios::trunc), meta_(meta) {
  meta_.validate();
  if (!out_) throw FormatError(fmt::format("cannot open {} for writing", path.string()));
  write_header(out_, meta_);
}

SnapshotWriter::~SnapshotWriter() = default;

void SnapshotWriter::write_column(const Eigen::Ref<const Eigen::VectorXd>& column) {
  if (closed_) throw FormatError("SNP1 writer already closed");
  if (written_ >= meta_.n_t) {
    throw FormatError(fmt::format("SNP1 writer expects exactly {} snapshots", meta_.n_t));
  }
  if (column.size() != meta_.state_size()) {
    throw ShapeError(fmt::format("snapshot column has {} values, expected {}", column.size(),
                                 meta_.state_size()));
  }
  for (Index j = 0; j < column.size(); ++j) {
    if (!std::isfinite(column(j))) {
      throw ValueError(fmt::format("non-finite value at row {} of snapshot {}", j, written_));
    }
  }
  const Eigen::VectorXd contiguous = column;
  write_column_le(out_, contiguous.data(), contiguous.size());
  ++written_;
}

void SnapshotWriter::close() {
  if (closed_) return;
  closed_ = true;
  if (written_ != meta_.n_t) {
    throw FormatError(fmt::format("SNP1 writer closed after {} of {} snapshots", written_,
                                  meta_.n_t));
  }
  out_.flush();
  if (!out_) throw FormatError("failed writing SNP1 file");
  out_.close();
}

}  // namespace lrenkf
