#include "a2mae/raster.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace a2mae::io {
namespace {

using nlohmann::json;

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::string& context) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw ParseError(ParseErrorKind::Truncated, context + ": truncated header");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value = static_cast<T>(value | (static_cast<T>(buf[i]) << (8 * i)));
  return value;
}

json corners_to_json(const geo::GeoMetadata& g) {
  json c = json::object();
  for (std::size_t i = 0; i < geo::kNumCorners; ++i) {
    c[geo::kCornerNames[i]] = {g.corners[i].lat_deg, g.corners[i].lon_deg};
  }
  return c;
}

data::ImageMeta parse_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::BadSidecar, "missing sidecar " + path.string());
  try {
    const json j = json::parse(in);
    data::ImageMeta meta;
    meta.source = data::parse_source(j.at("source_id").get<std::string>());
    meta.time = j.at("time").get<int>();
    meta.location_id = j.at("location_id").get<std::int64_t>();
    meta.geo.gsd_m = j.at("gsd_m").get<double>();
    const auto& corners = j.at("corners");
    for (std::size_t i = 0; i < geo::kNumCorners; ++i) {
      const auto& p = corners.at(geo::kCornerNames[i]);
      meta.geo.corners[i] = {p.at(0).get<double>(), p.at(1).get<double>()};
    }
    meta.geo.validate();
    return meta;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(ParseErrorKind::BadSidecar, "bad sidecar " + path.string() + ": " + e.what());
  }
}

}  // namespace

void write_frame(std::ostream& os, const RasterFrame& frame) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  os.write(kRasterMagic, 4);
  put_le<std::uint16_t>(os, kRasterVersion);
  put_le<std::uint32_t>(os, frame.height);
  put_le<std::uint32_t>(os, frame.width);
  put_le<std::uint16_t>(os, frame.channels);
  put_le<std::uint8_t>(os, kDtypeFloat32);
  for (float v : frame.data) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

RasterFrame read_frame(std::istream& is, const std::string& context) {
  char magic[4];
  if (!is.read(magic, 4)) throw ParseError(ParseErrorKind::Truncated, context + ": truncated header");
  if (std::memcmp(magic, kRasterMagic, 4) != 0) {
    throw ParseError(ParseErrorKind::BadMagic, context + ": magic mismatch (expected A2RS)");
  }
  const auto version = get_le<std::uint16_t>(is, context);
  if (version != kRasterVersion) {
    throw ParseError(ParseErrorKind::UnsupportedVersion, context + ": unsupported version " + std::to_string(version));
  }
  RasterFrame f;
  f.height = get_le<std::uint32_t>(is, context);
  f.width = get_le<std::uint32_t>(is, context);
  f.channels = get_le<std::uint16_t>(is, context);
  const auto dtype = get_le<std::uint8_t>(is, context);
  if (dtype != kDtypeFloat32) {
    throw ParseError(ParseErrorKind::UnsupportedDtype, context + ": unsupported dtype tag " + std::to_string(dtype));
  }
  const std::size_t n = static_cast<std::size_t>(f.height) * f.width * f.channels;
  std::vector<unsigned char> bytes(n * 4);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw ParseError(ParseErrorKind::Truncated, context + ": truncated payload (expected " +
                                                    std::to_string(bytes.size()) + " bytes)");
  }
  f.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u = 0;
    for (std::size_t b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    f.data[i] = std::bit_cast<float>(u);
  }
  return f;
}

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path) {
  auto p = raster_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_raster(const std::filesystem::path& path, const data::Image& raw) {
  RasterFrame f;
  f.height = static_cast<std::uint32_t>(raw.height);
  f.width = static_cast<std::uint32_t>(raw.width);
  f.channels = static_cast<std::uint16_t>(raw.channels);
  f.data.assign(raw.pixels.begin(), raw.pixels.end());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(ParseErrorKind::Io, "cannot open " + path.string() + " for writing");
    write_frame(out, f);
  }
  json side = {{"source_id", std::string(data::to_string(raw.meta.source))},
               {"time", raw.meta.time},
               {"gsd_m", raw.meta.geo.gsd_m},
               {"corners", corners_to_json(raw.meta.geo)},
               {"location_id", raw.meta.location_id}};
  std::ofstream meta_out(sidecar_path(path));
  if (!meta_out) throw ParseError(ParseErrorKind::Io, "cannot write sidecar for " + path.string());
  meta_out << side.dump(2) << '\n';
}

data::Image read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::Io, "cannot open " + path.string());
  const RasterFrame f = read_frame(in, path.string());
  const data::ImageMeta meta = parse_sidecar(sidecar_path(path));
  const auto expected = data::source_spec(meta.source).n_bands();
  if (f.channels != expected) {
    throw ParseError(ParseErrorKind::BandCountMismatch,
                     path.string() + ": sidecar says " + std::string(data::to_string(meta.source)) + " (" +
                         std::to_string(expected) + " bands) but raster has " + std::to_string(f.channels));
  }
  data::Image img(meta, f.height, f.width, f.channels);
  for (std::size_t i = 0; i < f.data.size(); ++i) img.pixels[i] = static_cast<double>(f.data[i]);
  return img;
}

data::Image ingest_raster(const std::filesystem::path& path) { return data::normalize(read_raster(path)); }

}  // namespace a2mae::io
