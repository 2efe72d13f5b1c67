/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "lrenkf/error.hpp"
#include "lrenkf/snapshot_io.hpp"
#include "oracles.hpp"

using namespace lrenkf;

namespace {

SnapshotMatrix random_field(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FieldMeta m{2, 3, 2, 1, 5, 0.25};
  return SnapshotMatrix(m, oracle::gaussian(m.state_size(), m.n_t, rng));
}

std::string serialize(const SnapshotMatrix& v) {
  std::ostringstream out(std::ios::binary);
  write_snapshots(out, v);
  return out.str();
}

SnapshotMatrix parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_snapshots(in);
}

}  // namespace

TEST(Snp1, HeaderLayoutIsLittleEndian) {
  FieldMeta m{1, 2, 1, 1, 1, 0.5};
  Eigen::MatrixXd d(2, 1);
  d << 1.0, -2.0;
  const std::string bytes = serialize(SnapshotMatrix(m, d));
  ASSERT_EQ(bytes.size(), kSnapshotHeaderBytes + 2 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "SNP1");
  const unsigned char expected_u32[] = {1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,
                                        1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
  EXPECT_EQ(std::memcmp(bytes.data() + 4, expected_u32, sizeof expected_u32), 0);
  // 0.5 = 0x3FE0000000000000
  const unsigned char half[] = {0, 0, 0, 0, 0, 0, 0xE0, 0x3F};
  EXPECT_EQ(std::memcmp(bytes.data() + 28, half, 8), 0);
  // -2.0 = 0xC000000000000000 is the second payload value
  const unsigned char minus_two[] = {0, 0, 0, 0, 0, 0, 0, 0xC0};
  EXPECT_EQ(std::memcmp(bytes.data() + 44, minus_two, 8), 0);
}

TEST(Snp1, RoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SnapshotMatrix v = random_field(seed);
    SnapshotMatrix back = parse(serialize(v));
    EXPECT_EQ(back.meta(), v.meta());
    EXPECT_EQ(std::memcmp(back.data().data(), v.data().data(), sizeof(double) * v.data().size()), 0);
  }
  FieldMeta m{1, 3, 1, 1, 1, 1.0};
  Eigen::MatrixXd d(3, 1);
  d << std::numeric_limits<double>::denorm_min(), -0.0, std::numeric_limits<double>::max();
  SnapshotMatrix back = parse(serialize(SnapshotMatrix(m, d)));
  EXPECT_TRUE(std::signbit(back.data()(1, 0)));
  EXPECT_EQ(back.data(), d);
}

TEST(Snp1, RejectsBadMagicVersionTruncationAndTrailingBytes) {
  const std::string good = serialize(random_field(9));
  std::string bad_magic = good;
  bad_magic[3] = '2';
  EXPECT_THROW(parse(bad_magic), FormatError);

  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(parse(bad_version), FormatError);

  EXPECT_THROW(parse(good.substr(0, 10)), FormatError);
  EXPECT_THROW(parse(good.substr(0, good.size() - 1)), FormatError);
  EXPECT_THROW(parse(good + "x"), FormatError);
  EXPECT_THROW(parse(""), FormatError);

  std::string zero_dim = good;
  std::memset(&zero_dim[8], 0, 4);
  EXPECT_THROW(parse(zero_dim), FormatError);
}

TEST(Snp1, FileRoundTripAndStreamingWriter) {
  const auto dir = std::filesystem::temp_directory_path() / "lrenkf_snp1_test";
  std::filesystem::create_directories(dir);
  SnapshotMatrix v = random_field(4);
  write_snapshots(dir / "a.snp", v);

  {
    SnapshotWriter w(dir / "b.snp", v.meta());
    for (Index k = 0; k < v.cols(); ++k) w.write_column(v.data().col(k));
    w.close();
  }
  EXPECT_EQ(read_snapshots(dir / "a.snp").data(), v.data());
  EXPECT_EQ(read_snapshots(dir / "b.snp").data(), v.data());

  SnapshotWriter early(dir / "c.snp", v.meta());
  early.write_column(v.data().col(0));
  EXPECT_THROW(early.close(), FormatError);
  EXPECT_THROW(early.write_column(Eigen::VectorXd::Zero(3)), FormatError);

  SnapshotWriter wrong(dir / "d.snp", v.meta());
  EXPECT_THROW(wrong.write_column(Eigen::VectorXd::Zero(3)), ShapeError);

  EXPECT_THROW(read_snapshots(dir / "missing.snp"), FormatError);
  std::filesystem::remove_all(dir);
}
