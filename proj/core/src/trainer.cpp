#include "drmoe/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "drmoe/error.hpp"

namespace drmoe {

std::size_t TrainConfig::total_epochs(HeadMode mode) const {
  return epochs + (mode == HeadMode::full ? fuse_epochs : 0);
}

TrainState init_training(const ModelConfig& model_cfg, const TrainConfig& cfg, std::uint64_t seed) {
  TrainState s;
  s.rng.seed(seed);
  s.model = make_model(model_cfg, s.rng);
  for (ParamGroup g : kParamGroups) {
    s.optimizer(g) = AdamState(to_string(g), cfg.adam, pack(s.model, g).size());
  }
  return s;
}

std::vector<std::vector<std::size_t>> stratified_batches(const Dataset& data, std::size_t batch_size,
                                                         std::mt19937_64& rng) {
  if (batch_size == 0) throw ValidationError("batch: must be positive");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.samples[i].label)].push_back(i);
  }
  const std::size_t nb = std::max<std::size_t>(1, (data.size() + batch_size - 1) / batch_size);
  std::vector<std::vector<std::size_t>> batches(nb);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) batches[k % nb].push_back(idx[k]);
    if (!idx.empty() && idx.size() < nb) {
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      for (std::size_t b = idx.size(); b < nb; ++b) batches[b].push_back(idx[pick(rng)]);
    }
  }
  return batches;
}

LossSettings loss_settings(const Dataset& train, const TrainConfig& cfg) {
  const std::size_t pos = train.count(1);
  const std::size_t neg = train.count(0);
  if (pos == 0 || neg == 0) {
    throw ValidationError("training data is single-class (" + std::to_string(neg) + " correct, " +
                          std::to_string(pos) + " mistake); both classes are required");
  }
  const auto n = static_cast<double>(train.size());
  LossSettings s{{1.0, 1.0}, ClassFreq(static_cast<double>(neg) / n, static_cast<double>(pos) / n),
                 cfg.surrogate};
  s.class_weights = class_weights(s.freq, cfg.weight_norm);
  return s;
}

namespace {

std::vector<const Sample*> gather(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<const Sample*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&data.samples[i]);
  return out;
}

void phase_a_step(TrainState& st, const std::vector<const Sample*>& batch, const LossSettings& settings,
                  const TrainConfig& cfg, EpochRecord& rec) {
  DrMoeModel& m = st.model;
  ModelGrads grads = ModelGrads::zeros_like(m);
  const PhaseALosses losses = phase_a_loss(m, batch, settings, &grads);
  rec.loss_wce += losses.wce;
  rec.loss_auc += losses.auc;
  rec.loss_la += losses.la;
  rec.loss_total += losses.total();

  const HeadMode mode = m.config.head_mode;
  const bool use_h1 = mode == HeadMode::full || mode == HeadMode::ce || mode == HeadMode::wce;
  const bool use_h2 = mode == HeadMode::full || mode == HeadMode::auc;
  const bool use_h3 = mode == HeadMode::full || mode == HeadMode::la;

  // Joint features for head 3 are taken before any parameter moves.
  std::vector<Vec> joints;
  std::vector<Label> labels;
  if (use_h3) {
    joints.reserve(batch.size());
    for (const Sample* s : batch) {
      joints.push_back(joint_features(m, s->ctx, s->seg).joint);
      labels.push_back(s->label);
    }
  }

  std::vector<ParamGroup> adam_groups{ParamGroup::shared};
  if (use_h1) adam_groups.push_back(ParamGroup::head1);
  if (use_h2) adam_groups.push_back(ParamGroup::head2);
  for (ParamGroup g : adam_groups) {
    Vec params = pack(m, g);
    adam_step(st.optimizer(g), params, pack(grads, g));
    unpack(m, g, params);
  }

  if (use_h3) {
    const LinearHead head3 = m.heads[2];
    Vec params = pack(m, ParamGroup::head3);
    sam_step(cfg.sam, st.optimizer(ParamGroup::head3), params, [&](std::span<const double> p) {
      return la_head_objective(head3, p, joints, labels, settings.freq);
    });
    unpack(m, ParamGroup::head3, params);
  }
}

void phase_b_step(TrainState& st, const std::vector<const Sample*>& batch, EpochRecord& rec) {
  ModelGrads grads = ModelGrads::zeros_like(st.model);
  rec.loss_fuse += fusion_loss(st.model, batch, &grads);
  Vec params = pack(st.model, ParamGroup::fusion);
  adam_step(st.optimizer(ParamGroup::fusion), params, pack(grads, ParamGroup::fusion));
  unpack(st.model, ParamGroup::fusion, params);
}

}  // namespace

void train_until(TrainState& st, const Dataset& train, const TrainConfig& cfg, std::size_t stop_epoch,
                 const Dataset* val) {
  const LossSettings settings = loss_settings(train, cfg);
  if (train.d_ctx() != st.model.config.d_ctx || train.d_seg() != st.model.config.d_seg) {
    throw ValidationError("training data dimensions " + std::to_string(train.d_ctx()) + "/" +
                          std::to_string(train.d_seg()) + " do not match the model (" +
                          std::to_string(st.model.config.d_ctx) + "/" + std::to_string(st.model.config.d_seg) +
                          ")");
  }
  const std::size_t total = cfg.total_epochs(st.model.config.head_mode);
  stop_epoch = std::min(stop_epoch, total);

  while (st.epoch < stop_epoch) {
    EpochRecord rec;
    rec.epoch = st.epoch + 1;
    rec.phase = rec.epoch <= cfg.epochs ? 'A' : 'B';
    const auto batches = stratified_batches(train, cfg.batch, st.rng);
    for (const auto& idx : batches) {
      const auto batch = gather(train, idx);
      if (rec.phase == 'A') {
        phase_a_step(st, batch, settings, cfg, rec);
      } else {
        phase_b_step(st, batch, rec);
      }
      ++rec.steps;
    }
    const auto steps = static_cast<double>(rec.steps);
    rec.loss_wce /= steps;
    rec.loss_auc /= steps;
    rec.loss_la /= steps;
    rec.loss_total /= steps;
    rec.loss_fuse /= steps;

    double alpha_sum = 0.0;
    for (const auto& s : train.samples) alpha_sum += joint_features(st.model, s.ctx, s.seg).alpha;
    rec.mean_alpha = alpha_sum / static_cast<double>(train.size());
    rec.beta = st.model.beta();
    if (val != nullptr && !val->empty()) rec.val = evaluate(st.model, *val, cfg.threshold);

    st.history.push_back(std::move(rec));
    ++st.epoch;
  }
}

TrainState train(const ModelConfig& model_cfg, const TrainConfig& cfg, std::uint64_t seed, const Dataset& data,
                 const Dataset* val) {
  loss_settings(data, cfg);  // rejects single-class data before any work
  TrainState st = init_training(model_cfg, cfg, seed);
  train_until(st, data, cfg, cfg.total_epochs(model_cfg.head_mode), val);
  return st;
}

MetricsReport evaluate(const DrMoeModel& m, const Dataset& data, double threshold) {
  const auto preds = predict_batch(m, data.samples, threshold);
  std::vector<Label> labels = data.labels();
  std::vector<Label> hard(preds.size());
  Vec scores(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    hard[i] = preds[i].label;
    scores[i] = preds[i].score();
  }
  MetricsReport r = prf(confusion(hard, labels));
  if (data.count(0) > 0 && data.count(1) > 0) r.auc = auc_metric(scores, labels);
  return r;
}

}  // namespace drmoe
