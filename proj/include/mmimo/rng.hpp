#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "mmimo/common.hpp"

// Counter-based random substreams.
//
// Every random quantity in a simulation is drawn from its own engine whose
// seed is a hash of (master seed, purpose, counters...). Draws therefore do
// not depend on evaluation order, so serial and threaded runs agree bit for
// bit.
namespace mmimo::rng {

using Engine = std::mt19937_64;

enum class Purpose : std::uint64_t {
  kFading = 1,
  kPilotNoise = 2,
  kResolventOracle = 3,
  kConditionalOracle = 4,
  kTestInstance = 5,
};

std::uint64_t mix(std::uint64_t x);

Engine substream(std::uint64_t seed, Purpose purpose, std::initializer_list<std::uint64_t> counters);

// Standard circular complex Gaussian, (x + iy)/sqrt(2), so that E|z|^2 = 1.
Complex circular_gaussian(Engine& engine);
CVector circular_gaussian(Engine& engine, Eigen::Index n);
CMatrix circular_gaussian(Engine& engine, Eigen::Index rows, Eigen::Index cols);

}  // namespace mmimo::rng
