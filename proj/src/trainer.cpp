#include "a2mae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "a2mae/checkpoint.hpp"
#include "a2mae/optim.hpp"

namespace a2mae::train {
namespace {

bool contains(const std::vector<data::SetKind>& kinds, data::SetKind k) {
  return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

std::vector<std::vector<const data::ImageSet*>> phase_pools(const TrainConfig& cfg, const data::Dataset& dataset,
                                                             const std::set<std::int64_t>* keep_reserve) {
  std::vector<std::vector<const data::ImageSet*>> pools;
  for (const auto& phase : cfg.curriculum) {
    std::vector<const data::ImageSet*> pool;
    for (const auto& s : dataset.sets) {
      if (!contains(phase.kinds, s.kind)) continue;
      if (keep_reserve && s.kind == data::SetKind::S2L8Reserve && !keep_reserve->contains(s.location_id)) continue;
      pool.push_back(&s);
    }
    if (pool.empty()) throw std::invalid_argument("curriculum phase '" + phase.name + "' has no matching sets");
    pools.push_back(std::move(pool));
  }
  return pools;
}

std::size_t steps_per_epoch(std::size_t pool, std::size_t batch) { return (pool + batch - 1) / batch; }

std::vector<double> standardize_stats(const std::vector<std::vector<double>>& x, std::vector<double>& scale) {
  const std::size_t d = x.front().size();
  std::vector<double> mean(d, 0.0);
  scale.assign(d, 0.0);
  for (const auto& r : x) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(x.size());
  for (const auto& r : x) {
    for (std::size_t j = 0; j < d; ++j) scale[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  }
  for (auto& s : scale) {
    const double sd = std::sqrt(s / static_cast<double>(x.size()));
    s = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  return mean;
}

}  // namespace

std::vector<CurriculumPhase> TrainConfig::default_curriculum(std::size_t epochs) {
  const auto first = std::min(epochs, std::max<std::size_t>(1, (epochs * 7 + 5) / 10));
  std::vector<CurriculumPhase> phases{{"s2l8", {data::SetKind::S2L8City, data::SetKind::S2L8Reserve}, first}};
  if (epochs > first) phases.push_back({"gfs2", {data::SetKind::GFS2}, epochs - first});
  return phases;
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("mask_ratio must be in (0, 1)");
  if (curriculum.empty()) throw std::invalid_argument("curriculum needs at least one phase");
  std::size_t sum = 0;
  for (const auto& p : curriculum) {
    if (p.kinds.empty()) throw std::invalid_argument("curriculum phase '" + p.name + "' lists no set kinds");
    sum += p.epochs;
  }
  if (sum != epochs) {
    throw std::invalid_argument("curriculum epochs sum to " + std::to_string(sum) + " but epochs = " +
                                std::to_string(epochs));
  }
}

bool TrainConfig::operator==(const TrainConfig& o) const {
  return epochs == o.epochs && batch_size == o.batch_size && base_lr == o.base_lr &&
         warmup_steps == o.warmup_steps && weight_decay == o.weight_decay && mask_ratio == o.mask_ratio &&
         mask_strategy == o.mask_strategy && model == o.model && curriculum == o.curriculum && seed == o.seed;
}

std::size_t total_steps(const TrainConfig& cfg, const data::Dataset& dataset) {
  const auto pools = phase_pools(cfg, dataset, nullptr);
  std::size_t total = 0;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    total += cfg.curriculum[i].epochs * steps_per_epoch(pools[i].size(), cfg.batch_size);
  }
  return total;
}

PretrainResult pretrain(const TrainConfig& cfg, const data::Dataset& dataset,
                        const std::optional<std::filesystem::path>& out_dir,
                        const std::set<std::int64_t>* keep_reserve) {
  cfg.validate();
  const auto pools = phase_pools(cfg, dataset, keep_reserve);
  std::size_t total = 0;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    total += cfg.curriculum[i].epochs * steps_per_epoch(pools[i].size(), cfg.batch_size);
  }
  if (cfg.warmup_steps >= total) {
    throw std::invalid_argument("warmup_steps " + std::to_string(cfg.warmup_steps) + " must be below total steps " +
                                std::to_string(total));
  }

  model::ModelConfig mcfg = cfg.model;
  mcfg.init_seed = cfg.seed;
  PretrainResult result{model::MaskedAutoencoder(mcfg), {}, total, 0.0};
  auto& net = result.model;
  const auto params = net.parameter_ptrs();
  nn::AdamW opt({cfg.base_lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng order_rng = Rng::derive(cfg.seed, 0x0de5u);
  Rng sample_rng = Rng::derive(cfg.seed, 0x5a3bu);
  const std::size_t n_patches = mcfg.n_patches();
  if (out_dir) std::filesystem::create_directories(*out_dir);

  std::size_t step = 0;
  double baseline_sum = 0.0;
  for (std::size_t ph = 0; ph < pools.size(); ++ph) {
    const auto& pool = pools[ph];
    for (std::size_t epoch = 0; epoch < cfg.curriculum[ph].epochs; ++epoch) {
      std::vector<std::size_t> order(pool.size());
      std::iota(order.begin(), order.end(), 0);
      order_rng.shuffle(std::span(order));
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const double lr = nn::cosine_lr(step, total, cfg.base_lr, cfg.warmup_steps);
        net.zero_grad();
        LogEntry entry{step, ph, lr, 0.0, 0.0, {}};
        double baseline = 0.0;
        for (std::size_t b = start; b < end; ++b) {
          const data::ImageSet& set = *pool[order[b]];
          const auto input = data::sample_training_input(set, sample_rng);
          const auto metas = input.metas();
          const auto anchor = masking::choose_anchor(metas, sample_rng);
          const auto bands = masking::select_bands(input, sample_rng);
          const auto plan = masking::make_plan(cfg.mask_strategy, metas, anchor, n_patches, cfg.mask_ratio, sample_rng);
          nn::Tape tape;
          const auto prepared = net.prepare(input, plan, bands);
          const auto out = net.forward(tape, prepared);
          const double loss = out.loss.value()[0];
          if (!std::isfinite(loss)) throw TrainingError("non-finite loss at step " + std::to_string(step));
          tape.backward(out.loss);
          entry.loss += loss;
          entry.kinds.push_back(set.kind);

          double sq = 0.0, cnt = 0.0;
          for (std::size_t i = 0; i < prepared.targets.size(); ++i) {
            if (prepared.loss_mask[i] != 0.0) {
              sq += prepared.targets[i] * prepared.targets[i];
              cnt += 1.0;
            }
          }
          baseline += sq / cnt;
        }
        const double n = static_cast<double>(end - start);
        for (auto* p : params) {
          for (auto& g : p->grad.data()) g /= n;
        }
        try {
          opt.step(params, lr);
        } catch (const std::domain_error& e) {
          throw TrainingError("step " + std::to_string(step) + ": " + e.what());
        }
        entry.loss /= n;
        entry.baseline = baseline / n;
        baseline_sum += entry.baseline;
        result.log.push_back(std::move(entry));
        ++step;
      }
    }
    if (out_dir) save_checkpoint(*out_dir / ("phase-" + std::to_string(ph)), net, cfg);
  }
  result.mean_predictor_loss = baseline_sum / static_cast<double>(result.log.size());
  if (out_dir) {
    save_checkpoint(*out_dir / "final", net, cfg);
    write_loss_csv(*out_dir / "loss.csv", result.log);
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LogEntry>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "step,phase,lr,loss\n" << std::setprecision(17);
  for (const auto& e : log) os << e.step << ',' << e.phase << ',' << e.lr << ',' << e.loss << '\n';
}

ProbeResult linear_probe(const model::MaskedAutoencoder& model, const LabeledImages& train, const LabeledImages& eval,
                         const ProbeConfig& cfg) {
  if (train.images.size() != train.labels.size() || eval.images.size() != eval.labels.size()) {
    throw std::invalid_argument("linear_probe: image and label counts differ");
  }
  if (train.images.empty() || eval.images.empty()) throw std::invalid_argument("linear_probe: empty split");
  int max_label = 0;
  for (const auto* ls : {&train.labels, &eval.labels}) {
    for (int l : *ls) {
      if (l < 0) throw std::invalid_argument("linear_probe: negative label");
      max_label = std::max(max_label, l);
    }
  }
  const auto n_classes = static_cast<std::size_t>(max_label) + 1;

  auto features = [&](const LabeledImages& set) {
    std::vector<std::vector<double>> f;
    f.reserve(set.images.size());
    for (const auto& img : set.images) {
      f.push_back(img.channels == 3 ? model.encode(img, cfg.geo_at_finetune).pooled
                                    : model.multiband_tokenize(img, cfg.geo_at_finetune).pooled);
    }
    return f;
  };
  auto xtr = features(train);
  auto xev = features(eval);
  std::vector<double> scale;
  const auto mean = standardize_stats(xtr, scale);
  for (auto* x : {&xtr, &xev}) {
    for (auto& r : *x) {
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) * scale[j];
    }
  }

  // Full-batch gradient descent on the L2-regularized softmax cross-entropy.
  const std::size_t d = xtr.front().size();
  const std::size_t n = xtr.size();
  std::vector<double> w(n_classes * d, 0.0), bias(n_classes, 0.0);
  std::vector<double> logits(n_classes);
  auto predict = [&](const std::vector<double>& x, std::vector<double>& z) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      double s = bias[c];
      for (std::size_t j = 0; j < d; ++j) s += w[c * d + j] * x[j];
      z[c] = s;
    }
  };
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<double> gw(w.size(), 0.0), gb(n_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      predict(xtr[i], logits);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (auto& v : logits) z += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double g = logits[c] / z - (static_cast<int>(c) == train.labels[i] ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += g * xtr[i][j];
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.lr * (gw[k] / static_cast<double>(n) + cfg.l2 * w[k]);
    for (std::size_t c = 0; c < n_classes; ++c) bias[c] -= cfg.lr * gb[c] / static_cast<double>(n);
  }

  auto argmax = [&](const std::vector<double>& x) {
    predict(x, logits);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  };
  ProbeResult r;
  r.n_eval = xev.size();
  std::vector<double> hit(n_classes, 0.0), seen(n_classes, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xev.size(); ++i) {
    const auto y = static_cast<std::size_t>(eval.labels[i]);
    seen[y] += 1.0;
    if (argmax(xev[i]) == eval.labels[i]) {
      ++correct;
      hit[y] += 1.0;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_eval);
  for (std::size_t c = 0; c < n_classes; ++c) {
    r.per_class_accuracy.push_back(seen[c] > 0 ? hit[c] / seen[c] : std::numeric_limits<double>::quiet_NaN());
  }
  std::size_t train_correct = 0;
  for (std::size_t i = 0; i < n; ++i) train_correct += argmax(xtr[i]) == train.labels[i];
  r.train_accuracy = static_cast<double>(train_correct) / static_cast<double>(n);
  return r;
}

ProbeSplit probe_task(const data::Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must be in (0, 1)");
  std::vector<const data::ImageSet*> city = dataset.of_kinds({data::SetKind::S2L8City});
  if (city.size() < 2) throw std::invalid_argument("probe task needs at least two city sets");
  std::sort(city.begin(), city.end(), [](auto* a, auto* b) { return a->location_id < b->location_id; });
  Rng rng = Rng::derive(seed, 0x940bu);
  rng.shuffle(std::span(city));
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(city.size()))), 1, city.size() - 1);
  ProbeSplit split;
  for (std::size_t i = 0; i < city.size(); ++i) {
    auto& dst = i < n_train ? split.train : split.eval;
    for (const auto& img : city[i]->images) {
      if (img.meta.source != data::SourceId::S2like) continue;
      dst.images.push_back(img);
      dst.labels.push_back(city[i]->majority_class);
    }
  }
  return split;
}

}  // namespace a2mae::train
