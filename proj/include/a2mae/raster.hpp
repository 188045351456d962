#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "a2mae/imageset.hpp"

namespace a2mae::io {

// Container layout, little-endian:
//   "A2RS" | version u16 | H u32 | W u32 | C u16 | dtype u8 (0 = float32) | C*H*W floats
inline constexpr char kRasterMagic[4] = {'A', '2', 'R', 'S'};
inline constexpr std::uint16_t kRasterVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;
inline constexpr std::size_t kRasterHeaderBytes = 4 + 2 + 4 + 4 + 2 + 1;

enum class ParseErrorKind { Io, BadMagic, UnsupportedVersion, UnsupportedDtype, Truncated, BandCountMismatch, BadSidecar };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

struct RasterFrame {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint16_t channels = 0;
  std::vector<float> data;  // band-major
};

void write_frame(std::ostream& os, const RasterFrame& frame);
// `context` names the frame in error messages.
RasterFrame read_frame(std::istream& is, const std::string& context);

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path);

// Writes a raw image (values are stored as float32) plus its JSON sidecar.
void write_raster(const std::filesystem::path& path, const data::Image& raw);

// Raw image exactly as stored.
data::Image read_raster(const std::filesystem::path& path);

// Raw image followed by per-band normalization.
data::Image ingest_raster(const std::filesystem::path& path);

}  // namespace a2mae::io
