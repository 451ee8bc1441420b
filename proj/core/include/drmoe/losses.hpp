#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "drmoe/math.hpp"

namespace drmoe {

// Label convention: 0 = correct action, 1 = mistake.
using Label = int;

enum class HeadId { reweighted_ce = 1, auc = 2, logit_adjusted = 3 };

/// Linear classifier head over the joint feature. Heads 1 and 3 emit two logits, head 2 one score.
struct LinearHead {
  Mat w;
  Vec bias;
  HeadId id = HeadId::reweighted_ce;
};

std::size_t head_outputs(HeadId id);
LinearHead make_head(HeadId id, std::size_t d_in, std::mt19937_64& rng);

Vec head_forward(const LinearHead& h, std::span<const double> joint);

struct HeadGrads {
  Mat w;
  Vec bias;
  static HeadGrads zeros_like(const LinearHead& h);
};

/// Accumulates parameter gradients for one sample and returns d(loss)/d(joint).
Vec head_backward(const LinearHead& h, std::span<const double> joint,
                  std::span<const double> d_out, HeadGrads& grads);

/// Class proportions [f_correct, f_mistake]; both positive, summing to 1.
class ClassFreq {
 public:
  ClassFreq(double f_correct, double f_mistake);
  static ClassFreq from_labels(std::span<const Label> labels);

  double operator[](Label y) const { return f_[static_cast<std::size_t>(y)]; }
  const std::array<double, 2>& values() const { return f_; }

 private:
  std::array<double, 2> f_;
};

enum class WeightNorm { mean_one, raw };

/// Inverse-frequency class weights, by default rescaled to mean 1.
std::array<double, 2> class_weights(const ClassFreq& freq, WeightNorm norm = WeightNorm::mean_one);

struct LossGrad {
  double loss = 0.0;
  Mat grad;  // same shape as the logits batch
};

/// Batch-mean of w[y] * -log softmax(z)[y]. Logits are N x 2.
LossGrad weighted_ce_loss(const Mat& logits, std::span<const Label> labels,
                          const std::array<double, 2>& weights);

/// Plain mean cross-entropy.
LossGrad ce_loss(const Mat& logits, std::span<const Label> labels);

/// Mean cross-entropy of z + log(freq).
LossGrad la_loss(const Mat& logits, std::span<const Label> labels, const ClassFreq& freq);

enum class SurrogateVariant { squared_hinge, logistic };

struct SurrogateKind {
  SurrogateVariant variant = SurrogateVariant::squared_hinge;
  double margin = 1.0;  // squared_hinge only
};

double surrogate_value(const SurrogateKind& s, double t);
double surrogate_derivative(const SurrogateKind& s, double t);

struct AucLossGrad {
  double loss = 0.0;
  Vec grad_pos;
  Vec grad_neg;
};

/// Mean over all positive/negative pairs of l(s_pos - s_neg).
/// Uses the sorted O(n log n) path for squared hinge, the pairwise loop otherwise.
AucLossGrad auc_loss(std::span<const double> scores_pos, std::span<const double> scores_neg,
                     const SurrogateKind& s);
/// Direct double loop over all pairs.
AucLossGrad auc_loss_pairwise(std::span<const double> scores_pos, std::span<const double> scores_neg,
                              const SurrogateKind& s);
/// Sorted prefix-sum path; squared hinge only.
AucLossGrad auc_loss_sorted(std::span<const double> scores_pos, std::span<const double> scores_neg,
                            double margin);

}  // namespace drmoe
