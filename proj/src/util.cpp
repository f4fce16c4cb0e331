#include "dbmrl/util.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace dbmrl {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t counter) {
  // FNV-1a over the tag, then two mixing rounds.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) h = (h ^ c) * 1099511628211ULL;
  return mix64(mix64(base ^ h) + counter);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  for (;;) {
    const std::uint64_t v = eng_();
    const std::uint64_t r = v % n;
    // accept only draws from complete blocks of n values
    if (v - r <= std::uint64_t(0) - n) return r;
  }
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  std::size_t last_positive = 0;
  bool any = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    if (weights[i] > 0.0) {
      last_positive = i;
      any = true;
    }
  }
  if (!any || !(total > 0.0))
    throw std::invalid_argument("Rng::categorical: no positive weight");
  const double u = uniform01() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i;
  }
  // u landed in the round-off sliver past the last cumulative sum
  return last_positive;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void Rng::load_state(const std::string& text) {
  std::istringstream is(text);
  is >> eng_;
  if (!is) throw std::runtime_error("Rng::load_state: malformed state text");
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace dbmrl
