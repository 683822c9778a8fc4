#include "namegate/rng.hpp"

#include <cmath>
#include <numbers>

namespace namegate {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double counter_normal(std::uint64_t key, std::uint64_t index) {
  const std::uint64_t pair = index / 2;
  double u1 = unit_double(mix64(key ^ mix64(2 * pair)));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = unit_double(mix64(key ^ mix64(2 * pair + 1)));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return (index % 2 == 0) ? r * std::cos(theta) : r * std::sin(theta);
}

}  // namespace namegate
