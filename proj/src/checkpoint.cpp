#include "a2mae/checkpoint.hpp"

#include <fstream>

#include "a2mae/config.hpp"
#include "a2mae/raster.hpp"

namespace a2mae::train {
namespace {

constexpr const char* kFormat = "a2mae-checkpoint";
constexpr int kVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const model::MaskedAutoencoder& model, const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  config::json arrays = config::json::array();
  std::ofstream blob(dir / "params.a2rs", std::ios::binary);
  if (!blob) throw CheckpointError("cannot write " + (dir / "params.a2rs").string());
  for (const auto& p : model.parameters()) {
    arrays.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"decay", p.decay}});
    io::RasterFrame f;
    f.channels = 1;
    f.height = static_cast<std::uint32_t>(p.value.rank() == 2 ? p.value.rows() : 1);
    f.width = static_cast<std::uint32_t>(p.value.size() / f.height);
    f.data.reserve(p.value.size());
    for (double v : p.value.data()) f.data.push_back(static_cast<float>(v));
    io::write_frame(blob, f);
  }
  if (!blob.flush()) throw CheckpointError("failed writing " + (dir / "params.a2rs").string());

  const config::json manifest{{"format", kFormat},
                              {"version", kVersion},
                              {"model", config::to_json(model.config())},
                              {"train", config::to_json(cfg)},
                              {"arrays", arrays}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw CheckpointError("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw CheckpointError("cannot open " + (dir / "manifest.json").string());
  config::json manifest;
  try {
    manifest = config::json::parse(ms);
  } catch (const config::json::parse_error& e) {
    throw CheckpointError("manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw CheckpointError("manifest: not an a2mae checkpoint (version " + std::to_string(kVersion) + ")");
  }
  Checkpoint ck{model::MaskedAutoencoder(config::model_from_json(manifest.at("model"))),
                config::train_from_json(manifest.at("train"))};

  const auto& arrays = manifest.at("arrays");
  auto& params = ck.model.parameters();
  if (arrays.size() != params.size()) {
    throw CheckpointError("manifest lists " + std::to_string(arrays.size()) + " arrays, model has " +
                          std::to_string(params.size()));
  }
  std::ifstream blob(dir / "params.a2rs", std::ios::binary);
  if (!blob) throw CheckpointError("cannot open " + (dir / "params.a2rs").string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = arrays[i].at("name").get<std::string>();
    const auto shape = arrays[i].at("shape").get<nn::Shape>();
    auto& p = params[i];
    if (name != p.name || shape != p.value.shape()) {
      throw CheckpointError("array " + std::to_string(i) + " is '" + name + "' " + nn::to_string(shape) +
                            ", model expects '" + p.name + "' " + nn::to_string(p.value.shape()));
    }
    io::RasterFrame f;
    try {
      f = io::read_frame(blob, "array '" + name + "'");
    } catch (const io::ParseError& e) {
      throw CheckpointError(std::string("params.a2rs: ") + e.what());
    }
    if (f.data.size() != p.value.size()) {
      throw CheckpointError("array '" + name + "' holds " + std::to_string(f.data.size()) + " values, expected " +
                            std::to_string(p.value.size()));
    }
    for (std::size_t k = 0; k < f.data.size(); ++k) p.value[k] = static_cast<double>(f.data[k]);
  }
  return ck;
}

}  // namespace a2mae::train
