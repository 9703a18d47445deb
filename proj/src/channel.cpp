#include "ratelim/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace ratelim {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit_double(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

void ChannelConfig::validate() const {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("loss probability must lie in [0, 1)");
}

LossChannel::LossChannel(ChannelConfig config, std::uint64_t trial)
    : config_(config), trial_(trial), key_(mix64(mix64(config.seed) ^ (trial * 0xD1B54A32D192ED03ULL))) {
  config_.validate();
}

int LossChannel::draw(std::uint64_t k) const {
  if (config_.p == 0.0) return 1;
  const double u = unit_double(mix64(key_ ^ mix64(k)));
  return u < config_.p ? 0 : 1;
}

LossRecord LossChannel::record(std::uint64_t count) const {
  LossRecord r;
  r.gamma.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) r.gamma.push_back(draw(k));
  return r;
}

}  // namespace ratelim
