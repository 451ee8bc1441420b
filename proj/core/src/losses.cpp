#include "drmoe/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drmoe/error.hpp"

namespace drmoe {

namespace {

void check_batch(const Mat& logits, std::span<const Label> labels, const char* who) {
  if (logits.cols() != 2) {
    throw ValidationError(std::string(who) + ": expected N x 2 logits, got " + logits.shape());
  }
  if (logits.rows() != labels.size()) {
    throw ValidationError(std::string(who) + ": " + std::to_string(logits.rows()) + " logit rows vs " +
                          std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ValidationError(std::string(who) + ": empty batch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ValidationError(std::string(who) + ": label " + std::to_string(labels[i]) +
                            " at index " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

// Per-sample CE of (z + shift) weighted by weight[y]; gradient is w (softmax - onehot) / N.
LossGrad shifted_weighted_ce(const Mat& logits, std::span<const Label> labels,
                             const std::array<double, 2>& shift, const std::array<double, 2>& weights) {
  const std::size_t n = labels.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossGrad out{0.0, Mat(n, 2)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<double, 2> z{logits(i, 0) + shift[0], logits(i, 1) + shift[1]};
    const Vec lp = log_softmax(z);
    const auto y = static_cast<std::size_t>(labels[i]);
    const double w = weights[y];
    out.loss += -w * lp[y];
    for (std::size_t k = 0; k < 2; ++k) {
      out.grad(i, k) = w * (std::exp(lp[k]) - (k == y ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.loss *= inv_n;
  return out;
}

}  // namespace

std::size_t head_outputs(HeadId id) { return id == HeadId::auc ? 1 : 2; }

LinearHead make_head(HeadId id, std::size_t d_in, std::mt19937_64& rng) {
  const std::size_t outs = head_outputs(id);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
  LinearHead h{Mat(outs, d_in), Vec(outs, 0.0), id};
  for (double& v : h.w.values()) v = dist(rng);
  return h;
}

Vec head_forward(const LinearHead& h, std::span<const double> joint) {
  if (h.w.cols() != joint.size()) {
    throw ValidationError("head " + std::to_string(static_cast<int>(h.id)) + ": weight " +
                          h.w.shape() + " vs feature of length " + std::to_string(joint.size()));
  }
  Vec y = matvec(h.w, joint);
  axpy(1.0, h.bias, y);
  return y;
}

HeadGrads HeadGrads::zeros_like(const LinearHead& h) {
  return {Mat(h.w.rows(), h.w.cols()), Vec(h.bias.size(), 0.0)};
}

Vec head_backward(const LinearHead& h, std::span<const double> joint, std::span<const double> d_out,
                  HeadGrads& grads) {
  add_outer(grads.w, d_out, joint);
  axpy(1.0, d_out, grads.bias);
  return matvec_transposed(h.w, d_out);
}

ClassFreq::ClassFreq(double f_correct, double f_mistake) : f_{f_correct, f_mistake} {
  if (!(f_correct > 0.0) || !(f_mistake > 0.0)) {
    throw ValidationError("class frequencies must be positive, got [" + std::to_string(f_correct) +
                          ", " + std::to_string(f_mistake) + "]");
  }
  if (std::abs(f_correct + f_mistake - 1.0) > 1e-12) {
    throw ValidationError("class frequencies must sum to 1");
  }
}

ClassFreq ClassFreq::from_labels(std::span<const Label> labels) {
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  const auto n = static_cast<double>(labels.size());
  const double f1 = static_cast<double>(ones) / n;
  return {1.0 - f1, f1};
}

std::array<double, 2> class_weights(const ClassFreq& freq, WeightNorm norm) {
  std::array<double, 2> w{1.0 / freq[0], 1.0 / freq[1]};
  if (norm == WeightNorm::mean_one) {
    const double mean = 0.5 * (w[0] + w[1]);
    w[0] /= mean;
    w[1] /= mean;
  }
  return w;
}

LossGrad weighted_ce_loss(const Mat& logits, std::span<const Label> labels,
                          const std::array<double, 2>& weights) {
  check_batch(logits, labels, "weighted_ce_loss");
  return shifted_weighted_ce(logits, labels, {0.0, 0.0}, weights);
}

LossGrad ce_loss(const Mat& logits, std::span<const Label> labels) {
  check_batch(logits, labels, "ce_loss");
  return shifted_weighted_ce(logits, labels, {0.0, 0.0}, {1.0, 1.0});
}

LossGrad la_loss(const Mat& logits, std::span<const Label> labels, const ClassFreq& freq) {
  check_batch(logits, labels, "la_loss");
  return shifted_weighted_ce(logits, labels, {std::log(freq[0]), std::log(freq[1])}, {1.0, 1.0});
}

double surrogate_value(const SurrogateKind& s, double t) {
  if (s.variant == SurrogateVariant::logistic) return softplus(-t);
  const double gap = s.margin - t;
  return gap > 0.0 ? gap * gap : 0.0;
}

double surrogate_derivative(const SurrogateKind& s, double t) {
  if (s.variant == SurrogateVariant::logistic) return -sigmoid(-t);
  const double gap = s.margin - t;
  return gap > 0.0 ? -2.0 * gap : 0.0;
}

namespace {

void check_auc_inputs(std::span<const double> pos, std::span<const double> neg, const SurrogateKind& s) {
  if (pos.empty() || neg.empty()) {
    throw ValidationError("auc_loss: batch needs at least one positive and one negative (got " +
                          std::to_string(pos.size()) + " and " + std::to_string(neg.size()) +
                          "); the sampler must stratify by class");
  }
  if (s.variant == SurrogateVariant::squared_hinge && !(s.margin > 0.0)) {
    throw ValidationError("auc_loss: squared-hinge margin must be positive");
  }
}

}  // namespace

AucLossGrad auc_loss_pairwise(std::span<const double> pos, std::span<const double> neg,
                              const SurrogateKind& s) {
  check_auc_inputs(pos, neg, s);
  const double scale = 1.0 / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
  AucLossGrad out{0.0, Vec(pos.size(), 0.0), Vec(neg.size(), 0.0)};
  for (std::size_t i = 0; i < pos.size(); ++i) {
    for (std::size_t j = 0; j < neg.size(); ++j) {
      const double t = pos[i] - neg[j];
      out.loss += surrogate_value(s, t);
      const double d = surrogate_derivative(s, t);
      out.grad_pos[i] += d;
      out.grad_neg[j] -= d;
    }
  }
  out.loss *= scale;
  for (double& g : out.grad_pos) g *= scale;
  for (double& g : out.grad_neg) g *= scale;
  return out;
}

AucLossGrad auc_loss_sorted(std::span<const double> pos, std::span<const double> neg, double margin) {
  check_auc_inputs(pos, neg, {SurrogateVariant::squared_hinge, margin});
  const std::size_t np = pos.size();
  const std::size_t nn = neg.size();
  const double scale = 1.0 / (static_cast<double>(np) * static_cast<double>(nn));

  Vec neg_sorted(neg.begin(), neg.end());
  std::sort(neg_sorted.begin(), neg_sorted.end());
  // Suffix sums of n and n^2 over sorted negatives.
  Vec suf1(nn + 1, 0.0), suf2(nn + 1, 0.0);
  for (std::size_t k = nn; k-- > 0;) {
    suf1[k] = suf1[k + 1] + neg_sorted[k];
    suf2[k] = suf2[k + 1] + neg_sorted[k] * neg_sorted[k];
  }

  Vec pos_sorted(pos.begin(), pos.end());
  std::sort(pos_sorted.begin(), pos_sorted.end());
  Vec pre1(np + 1, 0.0);
  for (std::size_t k = 0; k < np; ++k) pre1[k + 1] = pre1[k] + pos_sorted[k];

  AucLossGrad out{0.0, Vec(np, 0.0), Vec(nn, 0.0)};
  // A pair is active when margin - (p - n) > 0, i.e. n > p - margin.
  for (std::size_t i = 0; i < np; ++i) {
    const auto first = static_cast<std::size_t>(
        std::upper_bound(neg_sorted.begin(), neg_sorted.end(), pos[i] - margin) - neg_sorted.begin());
    const auto k = static_cast<double>(nn - first);
    const double c = margin - pos[i];
    out.loss += k * c * c + 2.0 * c * suf1[first] + suf2[first];
    out.grad_pos[i] = -2.0 * (k * c + suf1[first]) * scale;
  }
  // Same pairs seen from a negative: p < n + margin.
  for (std::size_t j = 0; j < nn; ++j) {
    const auto end = static_cast<std::size_t>(
        std::lower_bound(pos_sorted.begin(), pos_sorted.end(), neg[j] + margin) - pos_sorted.begin());
    const auto k = static_cast<double>(end);
    out.grad_neg[j] = 2.0 * (k * (margin + neg[j]) - pre1[end]) * scale;
  }
  out.loss *= scale;
  return out;
}

AucLossGrad auc_loss(std::span<const double> pos, std::span<const double> neg, const SurrogateKind& s) {
  if (s.variant == SurrogateVariant::squared_hinge) return auc_loss_sorted(pos, neg, s.margin);
  return auc_loss_pairwise(pos, neg, s);
}

}  // namespace drmoe
