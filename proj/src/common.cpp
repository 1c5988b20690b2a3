#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace synood {

namespace {
std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels[i];
  }
  return out;
}
}  // namespace

PartialResultError::PartialResultError(std::vector<std::string> short_labels)
    : Error("not enough concepts after retries for: " + join_labels(short_labels)),
      short_labels_(std::move(short_labels)) {}

DivergenceError::DivergenceError(std::size_t epoch, double learning_rate)
    : Error([&] {
        std::ostringstream os;
        os << "training diverged (non-finite loss) at epoch " << epoch << " with learning rate "
           << learning_rate;
        return os.str();
      }()),
      epoch_(epoch),
      learning_rate_(learning_rate) {}

std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire-style rejection keeps the mapping unbiased and portable.
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

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

}  // namespace synood
