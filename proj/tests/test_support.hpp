#pragma once

#include <random>

#include "pscnn/compiler.hpp"
#include "pscnn/error.hpp"
#include "pscnn/model.hpp"

namespace pscnn::testing {

struct RandomCase {
  MappedModel mapped;
  std::uint32_t attempts = 0;
};

/// Draws random models until one compiles; weights come from the same rng.
inline RandomCase compilable_random_case(std::mt19937_64& rng, const RandomModelOptions& opts = {},
                                         const CompileOptions& copts = {}) {
  for (std::uint32_t attempt = 1;; ++attempt) {
    auto model = random_model(rng, opts);
    try {
      auto weights = random_weights(model, rng());
      return {map_model(model, weights, copts), attempt};
    } catch (const ValidationError&) {
    } catch (const CompileError&) {
    }
  }
}

}  // namespace pscnn::testing
