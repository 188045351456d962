#include <doctest.h>

#include <bitset>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "a2mae/geo.hpp"
#include "a2mae/rng.hpp"

using namespace a2mae;
using namespace a2mae::geo;

namespace {

// Brute-force oracle over all levels, using plain division.
int oracle_level(double gsd) {
  int best = 0;
  double best_err = 1e300;
  for (int k = 0; k <= 30; ++k) {
    const double cell_m = 512.0 / std::pow(2.0, k) * 111320.0;
    const double err = std::fabs(cell_m - gsd);
    if (err < best_err) {
      best_err = err;
      best = k;
    }
  }
  return best;
}

std::string oracle_bits(double deg, int level) {
  if (level == 0) return "";
  const double cell = 512.0 / std::pow(2.0, level);
  const auto idx = static_cast<unsigned long long>(std::floor((deg + 256.0) / cell));
  return std::bitset<64>(idx).to_string().substr(64 - static_cast<std::size_t>(level));
}

GeoMetadata square(double lat, double lon, double half_deg, double gsd) {
  GeoMetadata m;
  m.gsd_m = gsd;
  m.corners = {LatLon{lat + half_deg, lon - half_deg}, LatLon{lat + half_deg, lon + half_deg},
               LatLon{lat - half_deg, lon - half_deg}, LatLon{lat - half_deg, lon + half_deg}};
  return m;
}

}  // namespace

TEST_CASE("mesh levels halve from a 512 degree root") {
  CHECK(MeshLevel(0).cell_deg() == 512.0);
  for (int k = 1; k <= kMaxLevel; ++k) CHECK(MeshLevel(k).cell_deg() * 2.0 == MeshLevel(k - 1).cell_deg());
  CHECK(MeshLevel(21).cell_m_equator() == doctest::Approx(27.18).epsilon(1e-3));
  CHECK_THROWS_AS(MeshLevel(31), std::invalid_argument);
  CHECK_THROWS_AS(MeshLevel(-1), std::invalid_argument);
}

TEST_CASE("level_for_gsd") {
  CHECK(level_for_gsd(30.0).level() == 21);
  CHECK(level_for_gsd(512.0 * 111320.0).level() == 0);
  CHECK(level_for_gsd(1.0).level() == 26);

  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double g = std::exp(rng.uniform(std::log(0.01), std::log(1e8)));
    CHECK(level_for_gsd(g).level() == oracle_level(g));
  }

  SUBCASE("non-increasing in gsd") {
    for (int i = 0; i < 1000; ++i) {
      double a = std::exp(rng.uniform(-5.0, 18.0));
      double b = std::exp(rng.uniform(-5.0, 18.0));
      if (a > b) std::swap(a, b);
      CHECK(level_for_gsd(a).level() >= level_for_gsd(b).level());
    }
  }

  SUBCASE("ties go to the coarser level") {
    const double mid = 0.5 * (MeshLevel(10).cell_m_equator() + MeshLevel(11).cell_m_equator());
    CHECK(level_for_gsd(mid).level() == 10);
  }

  CHECK_THROWS_AS(level_for_gsd(0.0), std::invalid_argument);
  CHECK_THROWS_AS(level_for_gsd(-3.0), std::invalid_argument);
  CHECK_THROWS_AS(level_for_gsd(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(level_for_gsd(INFINITY), std::invalid_argument);
}

TEST_CASE("encode_corner examples") {
  const auto a = encode_corner(0.0, 0.0, 1);
  CHECK(a.row_bits == "1");
  CHECK(a.col_bits == "1");

  const auto b = encode_corner(-90.0, -180.0, 0);
  CHECK(b.row_bits.empty());
  CHECK(b.col_bits.empty());

  const auto c = encode_corner(45.0, -120.0, 2);
  CHECK(c.row_bits == "10");
  CHECK(c.col_bits == "01");

  CHECK_THROWS_AS(encode_corner(90.5, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(encode_corner(0.0, -180.01, 3), std::invalid_argument);
  CHECK_THROWS_AS(encode_corner(0.0, 0.0, 31), std::invalid_argument);
}

TEST_CASE("corner codes match an arithmetic oracle, nest, and contain their corner") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double lat = rng.uniform(-90.0, 90.0);
    const double lon = rng.uniform(-180.0, 180.0);
    const int level = static_cast<int>(rng.uniform_index(31));
    const auto code = encode_corner(lat, lon, level);
    REQUIRE(code.row_bits.size() == static_cast<std::size_t>(level));
    REQUIRE(code.col_bits.size() == static_cast<std::size_t>(level));
    CHECK(code.row_bits == oracle_bits(lat, level));
    CHECK(code.col_bits == oracle_bits(lon, level));

    const auto origin = decode_cell_origin(code);
    const double cell = MeshLevel(level).cell_deg();
    CHECK(origin.lat_deg <= lat);
    CHECK(lat < origin.lat_deg + cell);
    CHECK(origin.lon_deg <= lon);
    CHECK(lon < origin.lon_deg + cell);

    if (level >= 1) {
      const auto parent = encode_corner(lat, lon, level - 1);
      CHECK(code.row_bits.substr(0, parent.row_bits.size()) == parent.row_bits);
      CHECK(code.col_bits.substr(0, parent.col_bits.size()) == parent.col_bits);
      const auto p_origin = decode_cell_origin(parent);
      const double p_cell = MeshLevel(level - 1).cell_deg();
      CHECK(p_origin.lat_deg <= origin.lat_deg);
      CHECK(origin.lat_deg + cell <= p_origin.lat_deg + p_cell);
      CHECK(p_origin.lon_deg <= origin.lon_deg);
      CHECK(origin.lon_deg + cell <= p_origin.lon_deg + p_cell);
    }
  }
}

TEST_CASE("distinct cells give distinct codes") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const int level = 1 + static_cast<int>(rng.uniform_index(30));
    const double lat1 = rng.uniform(-90.0, 90.0), lon1 = rng.uniform(-180.0, 180.0);
    const double lat2 = rng.uniform(-90.0, 90.0), lon2 = rng.uniform(-180.0, 180.0);
    const bool same_cell = oracle_bits(lat1, level) == oracle_bits(lat2, level) &&
                           oracle_bits(lon1, level) == oracle_bits(lon2, level);
    CHECK((encode_corner(lat1, lon1, level) == encode_corner(lat2, lon2, level)) == same_cell);
  }
}

TEST_CASE("encode_geo pads four corners to 240 bits") {
  const auto meta = square(30.0, 100.0, 0.01, 30.0);
  const auto enc = encode_geo(meta);
  CHECK(enc.level.level() == 21);
  REQUIRE(enc.padded_bits.size() == 240);
  std::string expected;
  for (const auto& c : meta.corners) expected += oracle_bits(c.lat_deg, 21) + oracle_bits(c.lon_deg, 21);
  REQUIRE(expected.size() == 168);
  for (std::size_t i = 0; i < 240; ++i) {
    const double want = i < expected.size() ? (expected[i] == '1' ? 1.0 : 0.0) : 0.0;
    CHECK(enc.padded_bits[i] == want);
  }
}

TEST_CASE("geo_embedding") {
  const PosencConfig cfg{16, 1.0, 10000.0};
  std::vector<double> proj(kPaddedBits * cfg.embed_dim);
  Rng rng(5);
  for (auto& w : proj) w = rng.normal();

  const auto m30 = square(0.2, 0.2, 0.1, 30.0);
  CHECK(geo_embedding(m30, cfg, proj) == geo_embedding(m30, cfg, proj));

  const std::vector<double> zeros(proj.size(), 0.0);
  CHECK(geo_embedding(m30, cfg, zeros) == std::vector<double>(cfg.embed_dim, 0.0));

  auto m1 = m30;
  m1.gsd_m = 1.0;
  const auto e30 = encode_geo(m30), e1 = encode_geo(m1);
  CHECK(e30.codes[0].row_bits.size() == 21);
  CHECK(e1.codes[0].row_bits.size() == 26);
  CHECK(e30.padded_bits != e1.padded_bits);

  // Linear oracle: sum of projection rows of the set bits.
  const auto emb = geo_embedding(m30, cfg, proj);
  for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
    double want = 0.0;
    for (std::size_t i = 0; i < kPaddedBits; ++i) want += e30.padded_bits[i] * proj[i * cfg.embed_dim + j];
    CHECK(emb[j] == doctest::Approx(want).epsilon(1e-12));
  }

  CHECK_THROWS_AS(geo_embedding(m30, cfg, std::vector<double>(10)), std::invalid_argument);
  auto bad = m30;
  bad.gsd_m = -1.0;
  CHECK_THROWS_AS(geo_embedding(bad, cfg, proj), std::invalid_argument);
  bad = m30;
  bad.corners[2].lat_deg = -91.0;
  CHECK_THROWS_AS(geo_embedding(bad, cfg, proj), std::invalid_argument);
}

TEST_CASE("scaled_posenc") {
  const PosencConfig cfg{32, 1.0, 10000.0};

  SUBCASE("position zero") {
    const auto t = scaled_posenc(1, 1, 7.0, cfg);
    for (std::size_t p = 0; p < 16; ++p) {
      CHECK(t.at(0, 2 * p) == 0.0);
      CHECK(t.at(0, 2 * p + 1) == 1.0);
    }
  }

  SUBCASE("unit scale matches the standard sinusoid") {
    const auto t = scaled_posenc(5, 7, 1.0, cfg);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 7; ++c) {
        for (std::size_t p = 0; p < 16; ++p) {
          const bool x = p < 8;
          const double i = static_cast<double>(x ? p : p - 8);
          const double pos = static_cast<double>(x ? c : r);
          const double arg = pos * std::exp(-std::log(10000.0) * 2.0 * i / 32.0);
          CHECK(t.at(r * 7 + c, 2 * p) == doctest::Approx(std::sin(arg)).epsilon(1e-12));
          CHECK(t.at(r * 7 + c, 2 * p + 1) == doctest::Approx(std::cos(arg)).epsilon(1e-12));
        }
      }
    }
  }

  SUBCASE("position 6 at 3x gsd equals position 2 at the reference") {
    const auto coarse = scaled_posenc(1, 7, 3.0, cfg);
    const auto ref = scaled_posenc(1, 3, 1.0, cfg);
    for (std::size_t ch = 0; ch < 32; ++ch) CHECK(std::fabs(coarse.at(6, ch) - ref.at(2, ch)) < 1e-12);
  }

  SUBCASE("scaling identity on rational ratios") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t q = 1 + rng.uniform_index(6);
      const double ref_gsd = rng.uniform(0.5, 20.0);
      const PosencConfig c2{32, ref_gsd, 10000.0};
      const auto big = scaled_posenc(1, 8 * q, ref_gsd * static_cast<double>(q), c2);
      const auto small = scaled_posenc(1, 8, ref_gsd, c2);
      for (std::size_t pos = 0; pos < 8; ++pos) {
        for (std::size_t ch = 0; ch < 32; ++ch) {
          CHECK(std::fabs(big.at(pos * q, ch) - small.at(pos, ch)) < 1e-12);
        }
      }
    }
  }

  SUBCASE("sin^2 + cos^2 sums to D/2") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t d = 2 * (1 + rng.uniform_index(40));
      const auto t = scaled_posenc(6, 6, rng.uniform(0.1, 100.0), PosencConfig{d, 1.0, 10000.0});
      for (std::size_t r = 0; r < t.rows(); ++r) {
        double s = 0.0;
        for (double v : t.row(r)) s += v * v;
        CHECK(std::fabs(s - static_cast<double>(d) / 2.0) < 1e-12);
      }
    }
  }

  SUBCASE("odd dimension is rejected") {
    CHECK_THROWS_AS(scaled_posenc(2, 2, 1.0, PosencConfig{15, 1.0, 10000.0}), std::invalid_argument);
    CHECK_THROWS_AS(scaled_posenc(0, 2, 1.0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(scaled_posenc(2, 2, 0.0, cfg), std::invalid_argument);
  }
}

TEST_CASE("one_hot_geo_encoding") {
  CHECK(one_hot_geo_encoding(square(10.0, 10.0, 0.1, 10.0), 1) == std::vector<double>{1.0});

  const auto v = one_hot_geo_encoding(square(0.0, 0.0, 0.1, 10.0), 2);
  CHECK(v == std::vector<double>{0.0, 0.0, 0.0, 1.0});

  const auto a = one_hot_geo_encoding(square(12.0, 40.0, 0.1, 10.0), 8);
  const auto b = one_hot_geo_encoding(square(12.5, 41.0, 0.1, 30.0), 8);
  CHECK(a == b);

  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const double lat = rng.uniform(-89.0, 89.0), lon = rng.uniform(-179.0, 179.0);
    const std::size_t bins = 1 + rng.uniform_index(16);
    const auto e = one_hot_geo_encoding(square(lat, lon, 0.5, 10.0), bins);
    REQUIRE(e.size() == bins * bins);
    double total = 0.0;
    for (double x : e) total += x;
    CHECK(total == 1.0);
    const auto row = static_cast<std::size_t>((lat + 90.0) / (180.0 / static_cast<double>(bins)));
    const auto col = static_cast<std::size_t>((lon + 180.0) / (360.0 / static_cast<double>(bins)));
    CHECK(e[std::min(row, bins - 1) * bins + std::min(col, bins - 1)] == 1.0);
  }

  CHECK_THROWS_AS(one_hot_geo_encoding(square(0.0, 0.0, 0.1, 10.0), 0), std::invalid_argument);
  CHECK_THROWS_AS(one_hot_geo_encoding(square(89.95, 0.0, 0.1, 10.0), 4), std::invalid_argument);
}

TEST_CASE("metadata validation") {
  auto m = square(0.0, 0.0, 0.1, 10.0);
  CHECK_NOTHROW(m.validate());
  m.gsd_m = 0.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.gsd_m = 10.0;
  m.corners[1].lon_deg = 181.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  const auto c = square(3.0, 4.0, 0.2, 10.0).center();
  CHECK(c.lat_deg == doctest::Approx(3.0));
  CHECK(c.lon_deg == doctest::Approx(4.0));
}
