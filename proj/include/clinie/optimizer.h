// AdamW (decoupled weight decay) and global-norm gradient clipping.

#ifndef CLINIE_OPTIMIZER_H_
#define CLINIE_OPTIMIZER_H_

#include <vector>

#include "clinie/autodiff.h"

namespace clinie {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  AdamW(const ad::ParamSet& params, AdamWConfig config);

  // One update from the accumulated gradients. Frozen entries are untouched.
  void step(ad::ParamSet& params);
  long steps() const { return t_; }

 private:
  AdamWConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

// Rescales gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(ad::ParamSet& params, double max_norm);

}  // namespace clinie

#endif  // CLINIE_OPTIMIZER_H_
