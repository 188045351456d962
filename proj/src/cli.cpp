#include "a2mae/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "a2mae/checkpoint.hpp"
#include "a2mae/config.hpp"
#include "a2mae/dataset.hpp"
#include "a2mae/geo.hpp"
#include "a2mae/masking.hpp"
#include "a2mae/pruning.hpp"
#include "a2mae/trainer.hpp"

namespace a2mae::cli {
namespace {

using config::json;

const std::vector<std::string> kSubcommands{"generate-data", "prune", "pretrain", "probe", "geo-encode", "mask-plan"};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct GenerateArgs {
  std::string out;
  std::size_t locations = 200;
  std::string kinds = "s2l8_city,s2l8_reserve,gfs2";
  std::optional<std::uint64_t> seed;
  std::string config;
};

struct PruneArgs {
  std::string in;
  std::string out;
  std::optional<std::size_t> k;
  std::optional<double> keep;
  std::optional<double> cell_deg;
  std::uint64_t seed = 0;
  bool all_kinds = false;
  std::string config;
};

struct PretrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string keep;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> mask_ratio;
  std::optional<std::string> mask_strategy;
  std::optional<std::string> geo_mode;
  std::optional<std::uint64_t> seed;
};

struct ProbeArgs {
  std::string ckpt;
  std::string data;
  bool geo_at_finetune = false;
  double train_frac = 0.7;
  std::uint64_t seed = 0;
};

struct GeoArgs {
  double lat = 0.0;
  double lon = 0.0;
  double gsd = 10.0;
  std::size_t size = 64;
};

struct MaskArgs {
  std::string sources;
  std::string times;
  std::size_t patches = 64;
  double ratio = 0.75;
  std::uint64_t seed = 0;
  std::string strategy = "aam";
};

json generate(const GenerateArgs& a) {
  data::GeneratorConfig gen;
  if (!a.config.empty()) gen = config::load_run_config(a.config).generator;
  if (a.seed) gen.seed = *a.seed;
  std::vector<data::SetKind> kinds;
  for (const auto& k : split_csv(a.kinds)) kinds.push_back(data::parse_set_kind(k));
  if (kinds.empty()) throw std::invalid_argument("--kinds lists no set kinds");
  const auto ds = data::generate_dataset(gen, a.locations, kinds);
  data::save_dataset(a.out, ds);
  std::size_t images = 0;
  std::vector<std::size_t> hist(gen.n_classes, 0);
  for (const auto& s : ds.sets) {
    images += s.images.size();
    if (s.kind == kinds.front()) hist.at(static_cast<std::size_t>(s.majority_class))++;
  }
  return {{"out", a.out}, {"locations", a.locations}, {"sets", ds.sets.size()}, {"images", images},
          {"majority_class_histogram", hist}, {"seed", gen.seed}};
}

json prune(const PruneArgs& a) {
  pruning::PruningConfig cfg;
  if (!a.config.empty()) cfg = config::load_run_config(a.config).pruning;
  if (a.k) cfg.k = *a.k;
  if (a.keep) cfg.keep_frac = *a.keep;
  if (a.cell_deg) cfg.region_cell_deg = *a.cell_deg;
  if (a.all_kinds) cfg.reserve_only = false;
  cfg.validate();

  const auto ds = data::load_dataset(a.in);
  std::map<pruning::RegionId, std::vector<pruning::Item>> regions;
  std::vector<const data::ImageSet*> by_id;
  for (const auto& s : ds.sets) {
    if (cfg.reserve_only && s.kind != data::SetKind::S2L8Reserve) continue;
    const auto c = s.images.front().meta.geo.center();
    const auto id = static_cast<std::int64_t>(by_id.size());
    by_id.push_back(&s);
    regions[pruning::region_of(c.lat_deg, c.lon_deg, cfg.region_cell_deg)].push_back({id, pruning::set_feature(s)});
  }
  const auto res = pruning::prune(regions, cfg, a.seed);

  json kept = json::array();
  std::set<std::int64_t> kept_locations;
  for (auto id : res.kept) {
    const auto* s = by_id[static_cast<std::size_t>(id)];
    kept.push_back({{"location_id", s->location_id}, {"kind", std::string(data::to_string(s->kind))}});
    kept_locations.insert(s->location_id);
  }
  json stats = json::array();
  for (const auto& r : res.regions) {
    stats.push_back({{"region", {r.region.first, r.region.second}},
                     {"n", r.n},
                     {"kept", r.kept},
                     {"global_pool", r.global_pool}});
  }
  const json manifest{{"config", config::to_json(cfg)},
                      {"seed", a.seed},
                      {"candidates", by_id.size()},
                      {"kept", kept},
                      {"kept_location_ids", kept_locations},
                      {"regions", stats}};
  std::ofstream os(a.out);
  if (!os) throw std::runtime_error("cannot write " + a.out);
  os << manifest.dump(2) << '\n';
  return {{"out", a.out}, {"candidates", by_id.size()}, {"kept", res.kept.size()}, {"regions", res.regions.size()}};
}

std::set<std::int64_t> read_keep_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open prune manifest " + path);
  const json j = json::parse(is);
  std::set<std::int64_t> out;
  for (const auto& k : j.at("kept")) {
    if (k.at("kind").get<std::string>() == data::to_string(data::SetKind::S2L8Reserve)) {
      out.insert(k.at("location_id").get<std::int64_t>());
    }
  }
  return out;
}

json pretrain(const PretrainArgs& a) {
  train::TrainConfig cfg;
  if (!a.config.empty()) cfg = config::load_run_config(a.config).train;
  if (a.epochs) {
    cfg.epochs = *a.epochs;
    cfg.curriculum = train::TrainConfig::default_curriculum(cfg.epochs);
  }
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.lr) cfg.base_lr = *a.lr;
  if (a.mask_ratio) cfg.mask_ratio = *a.mask_ratio;
  if (a.mask_strategy) cfg.mask_strategy = masking::parse_strategy(*a.mask_strategy);
  if (a.geo_mode) cfg.model.geo_mode = model::parse_geo_mode(*a.geo_mode);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const auto ds = data::load_dataset(a.data);
  std::optional<std::set<std::int64_t>> keep;
  if (!a.keep.empty()) keep = read_keep_manifest(a.keep);
  const auto res = train::pretrain(cfg, ds, std::filesystem::path(a.out), keep ? &*keep : nullptr);

  const std::size_t tenth = std::max<std::size_t>(1, res.log.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < tenth; ++i) {
    first += res.log[i].loss;
    last += res.log[res.log.size() - 1 - i].loss;
  }
  return {{"steps", res.total_steps},
          {"first_decile_loss", first / static_cast<double>(tenth)},
          {"last_decile_loss", last / static_cast<double>(tenth)},
          {"mean_predictor_loss", res.mean_predictor_loss},
          {"checkpoint", (std::filesystem::path(a.out) / "final").string()},
          {"loss_log", (std::filesystem::path(a.out) / "loss.csv").string()}};
}

json probe(const ProbeArgs& a) {
  const auto ck = train::load_checkpoint(a.ckpt);
  const auto ds = data::load_dataset(a.data);
  const auto split = train::probe_task(ds, a.train_frac, a.seed);
  train::ProbeConfig pc;
  pc.geo_at_finetune = a.geo_at_finetune;
  const auto r = train::linear_probe(ck.model, split.train, split.eval, pc);
  json per_class = json::array();
  for (double v : r.per_class_accuracy) per_class.push_back(std::isnan(v) ? json(nullptr) : json(v));
  return {{"accuracy", r.accuracy},
          {"per_class_accuracy", per_class},
          {"n_eval", r.n_eval},
          {"train_accuracy", r.train_accuracy},
          {"geo_at_finetune", a.geo_at_finetune}};
}

json geo_encode(const GeoArgs& a) {
  if (!(a.lat >= -90.0 && a.lat <= 90.0) || !(a.lon >= -180.0 && a.lon <= 180.0)) {
    throw std::invalid_argument("center (" + std::to_string(a.lat) + ", " + std::to_string(a.lon) +
                                ") outside [-90,90]x[-180,180]");
  }
  if (!(a.gsd > 0.0) || a.size == 0) throw std::invalid_argument("--gsd and --size must be positive");
  const auto meta = data::footprint({a.lat, a.lon}, a.gsd, a.gsd * static_cast<double>(a.size));
  const auto enc = geo::encode_geo(meta);
  json corners = json::array();
  for (std::size_t i = 0; i < geo::kNumCorners; ++i) {
    corners.push_back({{"corner", geo::kCornerNames[i]},
                       {"lat", meta.corners[i].lat_deg},
                       {"lon", meta.corners[i].lon_deg},
                       {"row_bits", enc.codes[i].row_bits},
                       {"col_bits", enc.codes[i].col_bits}});
  }
  std::string bits;
  for (double b : enc.padded_bits) bits.push_back(b != 0.0 ? '1' : '0');
  return {{"gsd_m", a.gsd},
          {"level", enc.level.level()},
          {"cell_deg", enc.level.cell_deg()},
          {"cell_m_equator", enc.level.cell_m_equator()},
          {"corners", corners},
          {"padded_bits", bits}};
}

json mask_plan(const MaskArgs& a) {
  const auto sources = split_csv(a.sources);
  const auto times = split_csv(a.times);
  if (sources.size() != 3 || times.size() != 3) {
    throw std::invalid_argument("--sources and --times must each list exactly 3 values");
  }
  masking::Metas metas;
  for (std::size_t i = 0; i < 3; ++i) {
    metas[i].source = data::parse_source(sources[i]);
    try {
      metas[i].time = std::stoi(times[i]);
    } catch (const std::exception&) {
      throw std::invalid_argument("--times: '" + times[i] + "' is not an integer");
    }
    metas[i].geo.gsd_m = data::source_spec(metas[i].source).gsd_m;
  }
  const auto strategy = masking::parse_strategy(a.strategy);
  Rng rng(a.seed);
  const std::size_t anchor = masking::choose_anchor(metas, rng);
  const auto plan = masking::make_plan(strategy, metas, anchor, a.patches, a.ratio, rng);
  json images = json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    images.push_back({{"index", i},
                      {"source", std::string(data::to_string(metas[i].source))},
                      {"time", metas[i].time},
                      {"relation", plan.relations[i] ? json(std::string(masking::to_string(*plan.relations[i])))
                                                     : json(nullptr)},
                      {"masked", plan.masked[i]},
                      {"visible", plan.visible[i]}});
  }
  return {{"strategy", a.strategy},
          {"n_patches", plan.n_patches},
          {"ratio", plan.ratio},
          {"masked_per_image", masking::masked_count(plan.n_patches, plan.ratio)},
          {"anchor", plan.anchor_index},
          {"seed", a.seed},
          {"images", images}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anchor-aware masked autoencoder toolkit for synthetic multi-source imagery", "a2mae"};
  app.set_version_flag("--version", std::string("a2mae ") + kVersion);
  app.require_subcommand(1);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate-data", "Render a synthetic multi-source dataset");
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_option("--locations", ga.locations, "Number of locations")->capture_default_str();
  gen->add_option("--kinds", ga.kinds, "Comma-separated set kinds")->capture_default_str();
  gen->add_option("--seed", ga.seed, "Generator seed (default 0)");
  gen->add_option("--config", ga.config, "Run config JSON (generator section)");

  PruneArgs pa;
  auto* pr = app.add_subcommand("prune", "Cluster-based data pruning");
  pr->add_option("--in", pa.in, "Dataset directory")->required();
  pr->add_option("--out", pa.out, "Output manifest JSON")->required();
  pr->add_option("--k", pa.k, "Clusters per region (default 20)");
  pr->add_option("--keep", pa.keep, "Fraction kept per region (default 0.10)");
  pr->add_option("--cell-deg", pa.cell_deg, "Region cell size in degrees (default 1.0)");
  pr->add_option("--seed", pa.seed, "Clustering seed")->capture_default_str();
  pr->add_flag("--all-kinds", pa.all_kinds, "Prune every set kind, not only reserves");
  pr->add_option("--config", pa.config, "Run config JSON (pruning section)");

  PretrainArgs ta;
  auto* pt = app.add_subcommand("pretrain", "Masked-autoencoder pre-training");
  pt->add_option("--config", ta.config, "Run config JSON (train section)");
  pt->add_option("--data", ta.data, "Dataset directory")->required();
  pt->add_option("--out", ta.out, "Checkpoint directory")->required();
  pt->add_option("--keep", ta.keep, "Prune manifest restricting reserve sets");
  pt->add_option("--epochs", ta.epochs, "Total epochs (resets the curriculum split)");
  pt->add_option("--batch-size", ta.batch_size, "Batch size");
  pt->add_option("--lr", ta.lr, "Base learning rate");
  pt->add_option("--mask-ratio", ta.mask_ratio, "Masking ratio");
  pt->add_option("--mask-strategy", ta.mask_strategy, "aam, tube or random");
  pt->add_option("--geo-mode", ta.geo_mode, "none, one_hot, scale_only or full_gem");
  pt->add_option("--seed", ta.seed, "Training seed");

  ProbeArgs qa;
  auto* pb = app.add_subcommand("probe", "Frozen-feature linear probe");
  pb->add_option("--ckpt", qa.ckpt, "Checkpoint directory")->required();
  pb->add_option("--data", qa.data, "Dataset directory")->required();
  pb->add_flag("--geo-at-finetune", qa.geo_at_finetune, "Supply geo embeddings while probing");
  pb->add_option("--train-frac", qa.train_frac, "Fraction of locations used for training")->capture_default_str();
  pb->add_option("--seed", qa.seed, "Split seed")->capture_default_str();

  GeoArgs xa;
  auto* ge = app.add_subcommand("geo-encode", "Quadtree corner codes of an image footprint");
  ge->add_option("--lat", xa.lat, "Center latitude")->required();
  ge->add_option("--lon", xa.lon, "Center longitude")->required();
  ge->add_option("--gsd", xa.gsd, "Ground sample distance in meters")->required();
  ge->add_option("--size", xa.size, "Image edge in pixels")->capture_default_str();

  MaskArgs ma;
  auto* mp = app.add_subcommand("mask-plan", "Mask plan for one 3-image input");
  mp->add_option("--sources", ma.sources, "Three comma-separated sources (s2, l8, gf1, gf2)")->required();
  mp->add_option("--times", ma.times, "Three comma-separated time tags")->required();
  mp->add_option("--patches", ma.patches, "Patches per image")->capture_default_str();
  mp->add_option("--ratio", ma.ratio, "Masking ratio")->capture_default_str();
  mp->add_option("--seed", ma.seed, "Seed")->capture_default_str();
  mp->add_option("--strategy", ma.strategy, "aam, tube or random")->capture_default_str();

  if (!args.empty() && !args.front().starts_with("-") &&
      std::find(kSubcommands.begin(), kSubcommands.end(), args.front()) == kSubcommands.end()) {
    err << "error: unknown subcommand '" << args.front() << "'\navailable subcommands:";
    for (const auto& s : kSubcommands) err << ' ' << s;
    err << "\n";
    return kUsageError;
  }

  // Report unknown flags before CLI11 complains about missing required ones.
  const CLI::App* scope = &app;
  for (const auto& a : args) {
    if (scope == &app && !a.starts_with("-")) {
      scope = app.get_subcommand(a);
      continue;
    }
    const bool flag = a.starts_with("--") || (a.size() > 1 && a[0] == '-' && std::isalpha(static_cast<unsigned char>(a[1])));
    if (!flag || a == "--") continue;
    const std::string name = a.substr(0, a.find('='));
    const bool known = std::ranges::any_of(scope->get_options(), [&](const CLI::Option* o) {
      return o->check_name(name);
    });
    if (!known) {
      err << "error: unknown flag '" << name << "'\nRun with --help for more information.\n";
      return kUsageError;
    }
  }

  std::vector<std::string> argv_store{"a2mae"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kOk;
    if (args.empty()) {
      err << "available subcommands:";
      for (const auto& s : kSubcommands) err << ' ' << s;
      err << "\n";
    }
    return kUsageError;
  }

  try {
    json result;
    if (*gen) result = generate(ga);
    else if (*pr) result = prune(pa);
    else if (*pt) result = pretrain(ta);
    else if (*pb) result = probe(qa);
    else if (*ge) result = geo_encode(xa);
    else if (*mp) result = mask_plan(ma);
    out << result.dump(2) << '\n';
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace a2mae::cli
