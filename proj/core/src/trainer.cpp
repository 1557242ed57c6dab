#include "xmodal/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "xmodal/error.hpp"
#include "xmodal/index.hpp"
#include "xmodal/log.hpp"

namespace xmodal {

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = m.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.binary += b.binary;
  a.supcon += b.supcon;
  a.clip += b.clip;
  a.total += b.total;
  return a;
}

LossBreakdown divided(LossBreakdown a, std::size_t n) {
  if (n == 0) return a;
  const auto d = static_cast<double>(n);
  a.binary /= d;
  a.supcon /= d;
  a.clip /= d;
  a.total /= d;
  return a;
}

nlohmann::ordered_json loss_json(const LossBreakdown& l) {
  return {{"total", l.total}, {"binary", l.binary}, {"supcon", l.supcon}, {"clip", l.clip}};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ParameterError("batch size must be at least 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("dropout must lie in [0, 1)");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ParameterError("warmup fraction must lie in [0, 1)");
  }
  weights.validate();
  optim.validate();
}

std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) {
  return n / batch_size + (n % batch_size >= 2 ? 1 : 0);
}

BatchResult evaluate_batch(const ModelParams& params, const Matrix& image, const Matrix& text,
                           std::span<const int> labels, const LossWeights& w, double dropout_p,
                           Mode mode, std::uint64_t seed, bool with_grads) {
  const ForwardActivations act = forward(params, image, text, dropout_p, mode, seed);
  const BceLossResult bce = bce_with_logits(act.logits, labels);
  const SupConLossResult sup = supcon_loss(act.features, labels, w.tau);
  const ClipLossResult clip = clip_loss(act.image_emb, act.text_emb, w.tau);

  BatchResult out;
  out.loss = composite_loss({bce.loss, sup.loss, clip.loss}, w);
  if (!with_grads) return out;

  ActivationGrads g;
  g.logits = bce.grad_logits;
  for (double& x : g.logits) x *= w.binary;
  g.features = sup.grad_features;
  for (double& x : g.features.data()) x *= w.supcon;
  g.image_emb = clip.grad_image;
  g.text_emb = clip.grad_text;
  for (double& x : g.image_emb.data()) x *= w.clip;
  for (double& x : g.text_emb.data()) x *= w.clip;
  out.grads = backward(params, act, g);
  return out;
}

ValidationStats evaluate_split(const ModelParams& params, const EmbeddingSet& data,
                               const LossWeights& weights, std::size_t batch_size) {
  if (data.empty()) throw PreconditionError("cannot evaluate an empty split");
  if (batch_size < 2) throw ParameterError("batch size must be at least 2");
  const Matrix image = data.image_matrix();
  const Matrix text = data.text_matrix();
  const std::vector<int> labels = data.binary_labels();
  const std::size_t n = data.size();

  ValidationStats out;
  const std::size_t batches = batches_per_epoch(n, batch_size);
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(n, begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    std::vector<int> y(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                       labels.begin() + static_cast<std::ptrdiff_t>(end));
    out.loss += evaluate_batch(params, gather_rows(image, idx), gather_rows(text, idx), y, weights,
                               0.0, Mode::Eval, 0, false)
                    .loss;
  }
  out.loss = divided(out.loss, batches);

  const ForwardActivations act = forward(params, image, text, 0.0, Mode::Eval, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int predicted = act.logits[i] > 0.0 ? 1 : 0;
    if (predicted == labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  const FusedIndex index = build_index(params, data);
  std::size_t hit_i2t = 0, hit_t2i = 0;
  for (const auto& rec : data.records) {
    if (index.search(embed_modality(&params, rec, Modality::Image), 1).front().study_id ==
        rec.study_id)
      ++hit_i2t;
    if (index.search(embed_modality(&params, rec, Modality::Text), 1).front().study_id ==
        rec.study_id)
      ++hit_t2i;
  }
  out.top1_i2t = static_cast<double>(hit_i2t) / static_cast<double>(n);
  out.top1_t2i = static_cast<double>(hit_t2i) / static_cast<double>(n);
  return out;
}

TrainResult train(const EmbeddingSet& data, const EmbeddingSet& val, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw PreconditionError("training set is empty");
  if (val.empty()) throw PreconditionError("validation set is empty");
  if (data.dim != val.dim) {
    throw ShapeError("training dimension " + std::to_string(data.dim) +
                     " does not match validation dimension " + std::to_string(val.dim));
  }
  const std::vector<int> labels = data.binary_labels();
  val.binary_labels();  // reject unlabeled validation records up front
  if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); })) {
    log::warn("training set contains a single class; supervised contrastive positives are "
              "every other sample and the classifier sees no negatives");
  }

  TrainResult result;
  result.params = init_params(data.dim, cfg.seed);
  if (cfg.epochs == 0) return result;

  const std::size_t n = data.size();
  const std::size_t per_epoch = batches_per_epoch(n, cfg.batch_size);
  if (per_epoch == 0) throw PreconditionError("training set needs at least 2 records");

  ScheduleConfig schedule;
  schedule.total_steps = static_cast<std::int64_t>(cfg.epochs * per_epoch);
  schedule.warmup_fraction = cfg.warmup_fraction;
  schedule.validate();

  std::ofstream log_out;
  if (!cfg.log_path.empty()) {
    log_out.open(cfg.log_path, std::ios::trunc);
    if (!log_out) throw IoError("cannot open epoch log " + cfg.log_path.string());
  }

  const Matrix image = data.image_matrix();
  const Matrix text = data.text_matrix();
  OptimState state;
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(n);
  std::vector<int> y;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog entry;
    entry.epoch = epoch;
    entry.batches = per_epoch;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      y.clear();
      for (std::size_t i : idx) y.push_back(labels[i]);

      const std::uint64_t dropout_seed = rng();
      const BatchResult br =
          evaluate_batch(result.params, gather_rows(image, idx), gather_rows(text, idx), y,
                         cfg.weights, cfg.dropout_p, Mode::Train, dropout_seed, true);
      const double scale = lr_scale_at(state.step, schedule);
      adamw_step(result.params, br.grads, state, cfg.optim, scale);
      entry.train += br.loss;
    }
    entry.train = divided(entry.train, per_epoch);
    entry.val = evaluate_split(result.params, val, cfg.weights, cfg.batch_size);
    log::info("epoch " + std::to_string(epoch) + " train total " +
              std::to_string(entry.train.total) + " val acc " +
              std::to_string(entry.val.accuracy));
    if (log_out.is_open()) log_out << epoch_log_json(entry) << '\n' << std::flush;
    result.logs.push_back(entry);
  }
  return result;
}

std::string epoch_log_json(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["batches"] = log.batches;
  j["train"] = loss_json(log.train);
  auto v = loss_json(log.val.loss);
  v["accuracy"] = log.val.accuracy;
  v["top1_i2t"] = log.val.top1_i2t;
  v["top1_t2i"] = log.val.top1_t2i;
  j["val"] = v;
  return j.dump();
}

}  // namespace xmodal
