#pragma once

// Episodic environment interface consumed by rollout collection: binary
// observation vectors and a flat discrete action space.

#include <cstddef>
#include <cstdint>

#include "dbmrl/energy_model.hpp"

namespace dbmrl {

struct StepResult {
  UnitAssignment obs;
  double reward = 0.0;
  bool done = false;
};

class RolloutEnv {
 public:
  virtual ~RolloutEnv() = default;
  virtual std::size_t obs_size() const = 0;
  virtual std::size_t n_actions() const = 0;
  virtual UnitAssignment reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::size_t action) = 0;
};

}  // namespace dbmrl
