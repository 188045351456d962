#include "a2mae/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "a2mae/geo.hpp"
#include "a2mae/rng.hpp"

namespace a2mae::model {
namespace {

std::size_t block_param_count(std::size_t d, std::size_t ratio) {
  const std::size_t hidden = d * ratio;
  return 2 * d                 // ln1
         + d * 3 * d + 3 * d   // qkv
         + d * d + d           // proj
         + 2 * d               // ln2
         + d * hidden + hidden // fc1
         + hidden * d + d;     // fc2
}

nn::Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  nn::Tensor t({fan_in, fan_out});
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

nn::Tensor small_normal(Rng& rng, std::size_t rows, std::size_t cols) {
  nn::Tensor t({rows, cols});
  for (auto& v : t.data()) v = rng.normal(0.0, 0.02);
  return t;
}

}  // namespace

std::string_view to_string(GeoMode mode) {
  switch (mode) {
    case GeoMode::None: return "none";
    case GeoMode::OneHot: return "one_hot";
    case GeoMode::ScaleOnly: return "scale_only";
    case GeoMode::FullGem: return "full_gem";
  }
  return "?";
}

GeoMode parse_geo_mode(std::string_view name) {
  for (auto m : {GeoMode::None, GeoMode::OneHot, GeoMode::ScaleOnly, GeoMode::FullGem}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown geo mode '" + std::string(name) +
                              "' (expected none, one_hot, scale_only or full_gem)");
}

void ModelConfig::validate() const {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
    throw std::invalid_argument("image_size must be a positive multiple of patch_size");
  }
  if (embed_dim == 0 || embed_dim % 4 != 0) throw std::invalid_argument("embed_dim must be a positive multiple of 4");
  if (decoder_dim == 0 || decoder_dim % 4 != 0) {
    throw std::invalid_argument("decoder_dim must be a positive multiple of 4");
  }
  if (heads == 0 || embed_dim % heads != 0) throw std::invalid_argument("embed_dim must be divisible by heads");
  if (decoder_heads == 0 || decoder_dim % decoder_heads != 0) {
    throw std::invalid_argument("decoder_dim must be divisible by decoder_heads");
  }
  if (depth == 0 || decoder_depth == 0) throw std::invalid_argument("depth and decoder_depth must be positive");
  if (mlp_ratio == 0) throw std::invalid_argument("mlp_ratio must be positive");
  if (!(reference_gsd_m > 0.0)) throw std::invalid_argument("reference_gsd_m must be positive");
  if (geo_mode == GeoMode::OneHot && one_hot_bins == 0) throw std::invalid_argument("one_hot_bins must be positive");
  if (n_patches() < 4) throw std::invalid_argument("need at least 4 patches per image");
}

std::size_t ModelConfig::geo_input_dim() const {
  switch (geo_mode) {
    case GeoMode::FullGem: return geo::kPaddedBits;
    case GeoMode::OneHot: return one_hot_bins * one_hot_bins;
    default: return 0;
  }
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.embed_dim;
  const std::size_t dd = cfg.decoder_dim;
  const std::size_t pd = cfg.patch_dim();
  const std::size_t g = cfg.geo_input_dim();
  const std::size_t n_src = data::kAllSources.size();
  const std::size_t n_t = ModelConfig::kTimeSlots;
  std::size_t n = pd * d + d + n_src * d + n_t * d + g * d;
  n += cfg.depth * block_param_count(d, cfg.mlp_ratio) + 2 * d;
  n += d * dd + dd + dd + n_src * dd + n_t * dd + g * dd;
  n += cfg.decoder_depth * block_param_count(dd, cfg.mlp_ratio) + 2 * dd;
  n += dd * pd + pd;
  return n;
}

nn::Tensor patchify(const data::Image& image, std::size_t p) {
  if (p == 0 || image.height % p != 0 || image.width % p != 0) {
    throw std::invalid_argument("patchify: image " + std::to_string(image.height) + "x" +
                                std::to_string(image.width) + " is not divisible by patch " + std::to_string(p));
  }
  const std::size_t gh = image.height / p;
  const std::size_t gw = image.width / p;
  const std::size_t c = image.channels;
  nn::Tensor out({gh * gw, p * p * c});
  for (std::size_t r = 0; r < gh; ++r) {
    for (std::size_t q = 0; q < gw; ++q) {
      auto row = out.row(r * gw + q);
      std::size_t k = 0;
      for (std::size_t py = 0; py < p; ++py) {
        for (std::size_t px = 0; px < p; ++px) {
          for (std::size_t ch = 0; ch < c; ++ch) row[k++] = image.at(ch, r * p + py, q * p + px);
        }
      }
    }
  }
  return out;
}

std::vector<double> unpatchify(const nn::Tensor& patches, std::size_t p, std::size_t gh, std::size_t gw,
                               std::size_t c) {
  if (patches.rank() != 2 || patches.rows() != gh * gw || patches.cols() != p * p * c) {
    throw std::invalid_argument("unpatchify: shape " + nn::to_string(patches.shape()) + " does not match layout");
  }
  const std::size_t h = gh * p;
  const std::size_t w = gw * p;
  std::vector<double> out(c * h * w);
  for (std::size_t r = 0; r < gh; ++r) {
    for (std::size_t q = 0; q < gw; ++q) {
      auto row = patches.row(r * gw + q);
      std::size_t k = 0;
      for (std::size_t py = 0; py < p; ++py) {
        for (std::size_t px = 0; px < p; ++px) {
          for (std::size_t ch = 0; ch < c; ++ch) out[(ch * h + r * p + py) * w + q * p + px] = row[k++];
        }
      }
    }
  }
  return out;
}

std::vector<std::array<std::size_t, 3>> band_groups(std::size_t channels) {
  if (channels == 0) throw std::invalid_argument("band_groups: image has no bands");
  std::vector<std::array<std::size_t, 3>> groups;
  for (std::size_t start = 0; start < channels; start += 3) {
    std::array<std::size_t, 3> g{};
    for (std::size_t i = 0; i < 3; ++i) g[i] = std::min(start + i, channels - 1);
    groups.push_back(g);
  }
  return groups;
}

std::array<std::size_t, 3> time_slots(const std::array<data::ImageMeta, 3>& metas) {
  std::set<int> distinct;
  for (const auto& m : metas) distinct.insert(m.time);
  std::array<std::size_t, 3> slots{};
  for (std::size_t i = 0; i < 3; ++i) {
    slots[i] = static_cast<std::size_t>(std::distance(distinct.begin(), distinct.find(metas[i].time)));
  }
  return slots;
}

MaskedAutoencoder::MaskedAutoencoder(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  init_weights();
}

std::size_t MaskedAutoencoder::add_param(const std::string& name, nn::Tensor value, bool decay) {
  index_.emplace(name, params_.size());
  params_.emplace_back(name, std::move(value), decay);
  return params_.size() - 1;
}

MaskedAutoencoder::BlockIdx MaskedAutoencoder::add_block(const std::string& prefix, std::size_t d) {
  // Values are filled in init_weights; shapes only here.
  const std::size_t hidden = d * cfg_.mlp_ratio;
  BlockIdx b{};
  b.ln1_g = add_param(prefix + ".ln1.gamma", nn::Tensor({d}, 1.0), false);
  b.ln1_b = add_param(prefix + ".ln1.beta", nn::Tensor({d}, 0.0), false);
  b.qkv_w = add_param(prefix + ".attn.qkv.weight", nn::Tensor({d, 3 * d}), true);
  b.qkv_b = add_param(prefix + ".attn.qkv.bias", nn::Tensor({3 * d}), false);
  b.proj_w = add_param(prefix + ".attn.proj.weight", nn::Tensor({d, d}), true);
  b.proj_b = add_param(prefix + ".attn.proj.bias", nn::Tensor({d}), false);
  b.ln2_g = add_param(prefix + ".ln2.gamma", nn::Tensor({d}, 1.0), false);
  b.ln2_b = add_param(prefix + ".ln2.beta", nn::Tensor({d}, 0.0), false);
  b.fc1_w = add_param(prefix + ".mlp.fc1.weight", nn::Tensor({d, hidden}), true);
  b.fc1_b = add_param(prefix + ".mlp.fc1.bias", nn::Tensor({hidden}), false);
  b.fc2_w = add_param(prefix + ".mlp.fc2.weight", nn::Tensor({hidden, d}), true);
  b.fc2_b = add_param(prefix + ".mlp.fc2.bias", nn::Tensor({d}), false);
  return b;
}

void MaskedAutoencoder::init_weights() {
  const std::size_t d = cfg_.embed_dim;
  const std::size_t dd = cfg_.decoder_dim;
  const std::size_t pd = cfg_.patch_dim();
  const std::size_t g = cfg_.geo_input_dim();
  const std::size_t n_src = data::kAllSources.size();
  const std::size_t n_t = ModelConfig::kTimeSlots;
  Rng rng(Rng::derive(cfg_.init_seed, 0x1417u).next_u64());

  params_.reserve(64);
  auto& L = layout_;
  L.patch_w = add_param("patch_embed.weight", xavier(rng, pd, d), true);
  L.patch_b = add_param("patch_embed.bias", nn::Tensor({d}), false);
  L.source = add_param("source_embed", small_normal(rng, n_src, d), false);
  L.time = add_param("time_embed", small_normal(rng, n_t, d), false);
  if (g > 0) L.geo = add_param("geo_embed.weight", small_normal(rng, g, d), false);
  for (std::size_t i = 0; i < cfg_.depth; ++i) L.enc.push_back(add_block("encoder.blocks." + std::to_string(i), d));
  L.enc_norm_g = add_param("encoder.norm.gamma", nn::Tensor({d}, 1.0), false);
  L.enc_norm_b = add_param("encoder.norm.beta", nn::Tensor({d}, 0.0), false);

  L.dec_w = add_param("decoder_embed.weight", xavier(rng, d, dd), true);
  L.dec_b = add_param("decoder_embed.bias", nn::Tensor({dd}), false);
  L.mask_token = add_param("mask_token", small_normal(rng, 1, dd), false);
  L.dec_source = add_param("decoder_source_embed", small_normal(rng, n_src, dd), false);
  L.dec_time = add_param("decoder_time_embed", small_normal(rng, n_t, dd), false);
  if (g > 0) L.dec_geo = add_param("decoder_geo_embed.weight", small_normal(rng, g, dd), false);
  for (std::size_t i = 0; i < cfg_.decoder_depth; ++i) {
    L.dec.push_back(add_block("decoder.blocks." + std::to_string(i), dd));
  }
  L.dec_norm_g = add_param("decoder.norm.gamma", nn::Tensor({dd}, 1.0), false);
  L.dec_norm_b = add_param("decoder.norm.beta", nn::Tensor({dd}, 0.0), false);
  L.pred_w = add_param("decoder_pred.weight", xavier(rng, dd, pd), true);
  L.pred_b = add_param("decoder_pred.bias", nn::Tensor({pd}), false);

  for (const auto& blocks : {L.enc, L.dec}) {
    for (const auto& b : blocks) {
      for (std::size_t w : {b.qkv_w, b.proj_w, b.fc1_w, b.fc2_w}) {
        auto& t = params_[w].value;
        t = xavier(rng, t.rows(), t.cols());
      }
    }
  }
}

std::vector<nn::Parameter*> MaskedAutoencoder::parameter_ptrs() {
  std::vector<nn::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

nn::Parameter& MaskedAutoencoder::parameter(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

const nn::Parameter& MaskedAutoencoder::parameter(std::string_view name) const {
  return const_cast<MaskedAutoencoder*>(this)->parameter(name);
}

std::size_t MaskedAutoencoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void MaskedAutoencoder::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<nn::Var> MaskedAutoencoder::bind_trainable(nn::Tape& tape) {
  std::vector<nn::Var> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(tape.grad_enabled() ? tape.parameter(p) : tape.constant(p.value));
  return out;
}

std::vector<nn::Var> MaskedAutoencoder::bind_frozen(nn::Tape& tape) const {
  std::vector<nn::Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.constant(p.value));
  return out;
}

nn::Var MaskedAutoencoder::affine_norm(const std::vector<nn::Var>& p, std::size_t g, std::size_t b,
                                       const nn::Var& x) const {
  return nn::layernorm(x, 1) * p[g] + p[b];
}

nn::Var MaskedAutoencoder::block(const std::vector<nn::Var>& p, const BlockIdx& b, nn::Var x,
                                 std::size_t heads) const {
  const std::size_t d = x.shape()[1];
  const std::size_t hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  const nn::Var h = affine_norm(p, b.ln1_g, b.ln1_b, x);
  const nn::Var qkv = nn::matmul(h, p[b.qkv_w]) + p[b.qkv_b];
  std::vector<nn::Var> outs;
  outs.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    const nn::Var q = nn::slice(qkv, 1, k * hd, hd);
    const nn::Var kk = nn::slice(qkv, 1, d + k * hd, hd);
    const nn::Var v = nn::slice(qkv, 1, 2 * d + k * hd, hd);
    const nn::Var att = nn::softmax(nn::scale(nn::matmul(q, nn::transpose(kk)), inv_sqrt), 1);
    outs.push_back(nn::matmul(att, v));
  }
  const nn::Var merged = heads == 1 ? outs[0] : nn::concat(outs, 1);
  x = x + (nn::matmul(merged, p[b.proj_w]) + p[b.proj_b]);

  const nn::Var h2 = affine_norm(p, b.ln2_g, b.ln2_b, x);
  const nn::Var mlp = nn::matmul(nn::gelu(nn::matmul(h2, p[b.fc1_w]) + p[b.fc1_b]), p[b.fc2_w]) + p[b.fc2_b];
  return x + mlp;
}

double grid_gsd_m(const geo::GeoMetadata& geo, std::size_t image_size) {
  const double extent_deg = geo.corners[0].lat_deg - geo.corners[2].lat_deg;
  const double g = extent_deg * geo::kMetersPerDegree / static_cast<double>(image_size);
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw std::invalid_argument("footprint has no north-south extent (TL lat must exceed BL lat)");
  }
  return g;
}

nn::Tensor MaskedAutoencoder::position_table(const geo::GeoMetadata& geo, std::size_t dim) const {
  geo::PosencConfig pc;
  pc.embed_dim = dim;
  pc.reference_gsd_m = cfg_.reference_gsd_m;
  const bool scaled = cfg_.geo_mode == GeoMode::ScaleOnly || cfg_.geo_mode == GeoMode::FullGem;
  const double g = scaled ? grid_gsd_m(geo, cfg_.image_size) : cfg_.reference_gsd_m;
  return geo::scaled_posenc(cfg_.grid(), cfg_.grid(), g, pc);
}

nn::Tensor MaskedAutoencoder::geo_inputs(std::span<const data::ImageMeta> metas) const {
  const std::size_t g = cfg_.geo_input_dim();
  nn::Tensor out({metas.size(), g});
  for (std::size_t i = 0; i < metas.size(); ++i) {
    const std::vector<double> v = cfg_.geo_mode == GeoMode::FullGem
                                      ? geo::encode_geo(metas[i].geo).padded_bits
                                      : geo::one_hot_geo_encoding(metas[i].geo, cfg_.one_hot_bins);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

PreparedInput MaskedAutoencoder::prepare(const data::TrainingInput& input, const masking::MaskPlan& plan,
                                         const masking::BandSelection& bands) const {
  const std::size_t n = cfg_.n_patches();
  if (plan.n_patches != n) {
    throw std::invalid_argument("mask plan covers " + std::to_string(plan.n_patches) + " patches, model expects " +
                                std::to_string(n));
  }
  PreparedInput out;
  out.metas = input.metas();
  out.plan = plan;
  const std::size_t pd = cfg_.patch_dim();
  out.targets = nn::Tensor({3 * n, pd});
  out.loss_mask = nn::Tensor({3 * n, pd});
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& img = input.images[j];
    if (img.height != cfg_.image_size || img.width != cfg_.image_size) {
      throw std::invalid_argument("image " + std::to_string(j) + " is " + std::to_string(img.height) + "x" +
                                  std::to_string(img.width) + ", model expects " + std::to_string(cfg_.image_size));
    }
    out.patches[j] = patchify(img.select_bands(bands.bands[j]), cfg_.patch_size);
    std::copy(out.patches[j].storage().begin(), out.patches[j].storage().end(),
              out.targets.storage().begin() + static_cast<std::ptrdiff_t>(j * n * pd));
    for (std::size_t m : plan.masked[j]) {
      auto row = out.loss_mask.row(j * n + m);
      std::fill(row.begin(), row.end(), 1.0);
    }
  }
  return out;
}

PretrainOutput MaskedAutoencoder::forward(nn::Tape& tape, const PreparedInput& in) {
  const std::size_t n = cfg_.n_patches();
  const std::size_t pd = cfg_.patch_dim();
  const std::size_t d = cfg_.embed_dim;
  const std::size_t dd = cfg_.decoder_dim;
  const auto& L = layout_;
  const auto p = bind_trainable(tape);
  const auto slots = time_slots(in.metas);

  PretrainOutput out;
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t v : in.plan.visible[j]) {
      out.token_image.push_back(j);
      out.token_patch.push_back(v);
    }
  }
  const std::size_t t = out.token_image.size();
  if (t == 0) throw std::invalid_argument("mask plan leaves no visible patch");

  std::array<nn::Tensor, 3> enc_pos;
  std::array<nn::Tensor, 3> dec_pos;
  for (std::size_t j = 0; j < 3; ++j) {
    enc_pos[j] = position_table(in.metas[j].geo, d);
    dec_pos[j] = position_table(in.metas[j].geo, dd);
  }

  // Encoder over visible tokens of all three images.
  nn::Tensor tokens({t, pd});
  nn::Tensor pos({t, d});
  std::vector<std::size_t> src_idx(t), time_idx(t);
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t j = out.token_image[k];
    const std::size_t q = out.token_patch[k];
    std::ranges::copy(in.patches[j].row(q), tokens.row(k).begin());
    std::ranges::copy(enc_pos[j].row(q), pos.row(k).begin());
    src_idx[k] = static_cast<std::size_t>(in.metas[j].source);
    time_idx[k] = slots[j];
  }
  nn::Var x = nn::matmul(tape.constant(std::move(tokens)), p[L.patch_w]) + p[L.patch_b];
  x = x + tape.constant(std::move(pos));
  x = x + nn::gather_rows(p[L.source], src_idx) + nn::gather_rows(p[L.time], time_idx);
  nn::Var geo_in;
  if (cfg_.uses_geo_embedding()) {
    geo_in = tape.constant(geo_inputs(in.metas));
    x = x + nn::gather_rows(nn::matmul(geo_in, p[L.geo]), out.token_image);
  }
  for (const auto& b : L.enc) x = block(p, b, x, cfg_.heads);
  x = affine_norm(p, L.enc_norm_g, L.enc_norm_b, x);

  // Decoder over every position; masked slots take the mask token.
  const nn::Var y = nn::matmul(x, p[L.dec_w]) + p[L.dec_b];
  std::vector<std::size_t> fill(3 * n, t);
  for (std::size_t k = 0; k < t; ++k) fill[out.token_image[k] * n + out.token_patch[k]] = k;
  nn::Var z = nn::gather_rows(nn::concat({y, p[L.mask_token]}, 0), fill);

  nn::Tensor dpos({3 * n, dd});
  std::vector<std::size_t> dsrc(3 * n), dtime(3 * n), dimg(3 * n);
  for (std::size_t j = 0; j < 3; ++j) {
    std::copy(dec_pos[j].storage().begin(), dec_pos[j].storage().end(),
              dpos.storage().begin() + static_cast<std::ptrdiff_t>(j * n * dd));
    for (std::size_t q = 0; q < n; ++q) {
      dsrc[j * n + q] = static_cast<std::size_t>(in.metas[j].source);
      dtime[j * n + q] = slots[j];
      dimg[j * n + q] = j;
    }
  }
  z = z + tape.constant(std::move(dpos));
  z = z + nn::gather_rows(p[L.dec_source], dsrc) + nn::gather_rows(p[L.dec_time], dtime);
  if (cfg_.uses_geo_embedding()) z = z + nn::gather_rows(nn::matmul(geo_in, p[L.dec_geo]), dimg);
  for (const auto& b : L.dec) z = block(p, b, z, cfg_.decoder_heads);
  z = affine_norm(p, L.dec_norm_g, L.dec_norm_b, z);
  out.prediction = nn::matmul(z, p[L.pred_w]) + p[L.pred_b];
  out.loss = nn::mse(out.prediction, tape.constant(in.targets), in.loss_mask);
  return out;
}

PretrainOutput MaskedAutoencoder::forward_pretrain(nn::Tape& tape, const data::TrainingInput& input,
                                                   const masking::MaskPlan& plan,
                                                   const masking::BandSelection& bands) {
  return forward(tape, prepare(input, plan, bands));
}

EncodedFeatures MaskedAutoencoder::encode_groups(const data::Image& image,
                                                 const std::vector<std::array<std::size_t, 3>>& groups,
                                                 bool use_geo) const {
  if (image.height != cfg_.image_size || image.width != cfg_.image_size) {
    throw std::invalid_argument("encode: image is " + std::to_string(image.height) + "x" +
                                std::to_string(image.width) + ", model expects " + std::to_string(cfg_.image_size));
  }
  const std::size_t n = cfg_.n_patches();
  const std::size_t pd = cfg_.patch_dim();
  const std::size_t d = cfg_.embed_dim;
  const std::size_t t = groups.size() * n;
  const auto& L = layout_;
  nn::Tape tape(false);
  const auto p = bind_frozen(tape);

  nn::Tensor tokens({t, pd});
  nn::Tensor pos({t, d});
  const nn::Tensor table = position_table(image.meta.geo, d);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const nn::Tensor patches = patchify(image.select_bands(groups[g]), cfg_.patch_size);
    std::copy(patches.storage().begin(), patches.storage().end(),
              tokens.storage().begin() + static_cast<std::ptrdiff_t>(g * n * pd));
    std::copy(table.storage().begin(), table.storage().end(),
              pos.storage().begin() + static_cast<std::ptrdiff_t>(g * n * d));
  }
  nn::Var x = nn::matmul(tape.constant(std::move(tokens)), p[L.patch_w]) + p[L.patch_b];
  x = x + tape.constant(std::move(pos));
  x = x + nn::gather_rows(p[L.source], std::vector<std::size_t>(t, static_cast<std::size_t>(image.meta.source)));
  x = x + nn::gather_rows(p[L.time], std::vector<std::size_t>(t, 0));
  if (use_geo && cfg_.uses_geo_embedding()) {
    const nn::Var geo_row = nn::matmul(tape.constant(geo_inputs(std::span(&image.meta, 1))), p[L.geo]);
    x = x + nn::gather_rows(geo_row, std::vector<std::size_t>(t, 0));
  }
  for (const auto& b : L.enc) x = block(p, b, x, cfg_.heads);
  x = affine_norm(p, L.enc_norm_g, L.enc_norm_b, x);
  const nn::Var pooled = nn::mean_rows(x);

  EncodedFeatures out;
  out.pooled = pooled.value().storage();
  out.n_tokens = t;
  return out;
}

EncodedFeatures MaskedAutoencoder::encode(const data::Image& image, bool use_geo) const {
  if (image.channels != 3) {
    throw std::invalid_argument("encode expects a 3-band image, got " + std::to_string(image.channels) +
                                " bands; use multiband_tokenize");
  }
  return encode_groups(image, {{0, 1, 2}}, use_geo);
}

EncodedFeatures MaskedAutoencoder::multiband_tokenize(const data::Image& image, bool use_geo) const {
  if (image.channels < 3) {
    throw std::invalid_argument("multiband_tokenize needs at least 3 bands, got " + std::to_string(image.channels));
  }
  return encode_groups(image, band_groups(image.channels), use_geo);
}

}  // namespace a2mae::model
