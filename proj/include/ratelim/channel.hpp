#pragma once

#include <cstdint>
#include <vector>

namespace ratelim {

/// i.i.d. Bernoulli packet-loss channel with perfect, delay-free acknowledgements.
struct ChannelConfig {
  double p = 0.0;  // loss probability in [0, 1)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Reception flags gamma[0..k]; 1 = received, 0 = lost.
struct LossRecord {
  std::vector<int> gamma;
};

/// Counter-based loss process: gamma_k is a pure function of (seed, trial, k),
/// so draws can be made in any order and replayed.
class LossChannel {
 public:
  explicit LossChannel(ChannelConfig config, std::uint64_t trial = 0);

  int draw(std::uint64_t k) const;
  LossRecord record(std::uint64_t count) const;

  double loss_probability() const { return config_.p; }
  std::uint64_t trial() const { return trial_; }

 private:
  ChannelConfig config_;
  std::uint64_t trial_;
  std::uint64_t key_;
};

/// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Uniform double in [0, 1) from a 64-bit word.
double unit_double(std::uint64_t x);

}  // namespace ratelim
