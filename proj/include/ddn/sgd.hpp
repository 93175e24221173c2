#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ddn {

/// Mini-batch SGD settings shared by every learner.
///
/// The learning rate follows a step schedule: it is multiplied by
/// `lr_decay` at each epoch listed in `lr_steps`.
struct sgd_config {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::vector<std::size_t> lr_steps;
  double lr_decay = 0.1;
  double l1 = 0.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;

  double rate_at(std::size_t epoch) const {
    double r = learning_rate;
    for (auto s : lr_steps) {
      if (epoch >= s) r *= lr_decay;
    }
    return r;
  }
};

}  // namespace ddn
