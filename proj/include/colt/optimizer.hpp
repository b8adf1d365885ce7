#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace colt {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

/// Adam with decoupled weight decay. Each parameter block gets its own
/// moment buffers, sized on first use.
class AdamW {
 public:
  explicit AdamW(AdamOptions options, std::size_t blocks = 1)
      : options_(options), first_(blocks), second_(blocks) {}

  /// Advances the shared step counter. Call once per update, before step().
  void begin_step() { ++t_; }

  void step(std::size_t block, std::span<double> params, std::span<const double> grads);

  long steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace colt
