#include "mmimo/rng.hpp"

#include <cmath>

namespace mmimo::rng {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Engine substream(std::uint64_t seed, Purpose purpose, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(purpose));
  for (std::uint64_t c : counters) h = mix(h ^ mix(c));
  return Engine(h);
}

Complex circular_gaussian(Engine& engine) {
  // A fresh distribution per call keeps the stream free of cached state.
  std::normal_distribution<double> normal(0.0, M_SQRT1_2);
  const double re = normal(engine);
  const double im = normal(engine);
  return {re, im};
}

CVector circular_gaussian(Engine& engine, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, M_SQRT1_2);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(engine);
    const double im = normal(engine);
    v(i) = Complex(re, im);
  }
  return v;
}

CMatrix circular_gaussian(Engine& engine, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, M_SQRT1_2);
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = normal(engine);
      const double im = normal(engine);
      m(r, c) = Complex(re, im);
    }
  }
  return m;
}

}  // namespace mmimo::rng
