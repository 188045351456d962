#include "a2mae/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "a2mae/config.hpp"
#include "a2mae/raster.hpp"

namespace a2mae::data {

std::vector<const ImageSet*> Dataset::of_kinds(const std::vector<SetKind>& kinds) const {
  std::vector<const ImageSet*> out;
  for (const auto& s : sets) {
    if (std::find(kinds.begin(), kinds.end(), s.kind) != kinds.end()) out.push_back(&s);
  }
  return out;
}

Dataset generate_dataset(const GeneratorConfig& cfg, std::size_t n_locations, const std::vector<SetKind>& kinds) {
  Dataset ds{cfg, {}};
  const Generator gen(cfg);
  for (std::size_t loc = 0; loc < n_locations; ++loc) {
    for (auto k : kinds) ds.sets.push_back(assemble_set(static_cast<std::int64_t>(loc), k, gen));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir / "images");
  config::json sets = config::json::array();
  for (const auto& s : dataset.sets) {
    config::json files = config::json::array();
    for (std::size_t i = 0; i < s.images.size(); ++i) {
      const std::string rel = "images/loc" + std::to_string(s.location_id) + "_" + std::string(to_string(s.kind)) +
                              "_" + std::to_string(i) + ".a2rs";
      io::write_raster(dir / rel, denormalize(s.images[i]));
      files.push_back(rel);
    }
    sets.push_back({{"location_id", s.location_id},
                    {"kind", std::string(to_string(s.kind))},
                    {"majority_class", s.majority_class},
                    {"images", files}});
  }
  const config::json manifest{{"generator", config::to_json(dataset.generator)}, {"sets", sets}};
  std::ofstream os(dir / "dataset.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "dataset.json").string());
  os << manifest.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "dataset.json");
  if (!is) throw std::runtime_error("cannot open " + (dir / "dataset.json").string());
  config::json manifest;
  try {
    manifest = config::json::parse(is);
  } catch (const config::json::parse_error& e) {
    throw std::runtime_error((dir / "dataset.json").string() + ": " + e.what());
  }
  Dataset ds;
  ds.generator = config::generator_from_json(manifest.at("generator"));
  for (const auto& js : manifest.at("sets")) {
    ImageSet s;
    s.location_id = js.at("location_id").get<std::int64_t>();
    s.kind = parse_set_kind(js.at("kind").get<std::string>());
    s.majority_class = js.at("majority_class").get<int>();
    for (const auto& f : js.at("images")) s.images.push_back(io::ingest_raster(dir / f.get<std::string>()));
    validate_set(s);
    ds.sets.push_back(std::move(s));
  }
  return ds;
}

}  // namespace a2mae::data
