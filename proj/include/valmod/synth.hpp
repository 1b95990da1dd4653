#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "valmod/errors.hpp"
#include "valmod/series.hpp"

namespace valmod {

/// Random-walk series with copies of one random-walk pattern planted in it.
struct SynthSpec {
  std::size_t length = 4096;
  std::size_t plant_length = 64;
  std::size_t plant_count = 2;
  /// Standard deviation of independent Gaussian noise added to each copy.
  double noise = 0.0;
  /// Plant offsets; evenly spread when empty.
  std::vector<std::size_t> offsets;
  std::uint64_t seed = 1;
};

struct SynthResult {
  SeriesRecord series;
  std::vector<std::size_t> offsets;
};

inline std::vector<std::size_t> spread_offsets(std::size_t n, std::size_t len,
                                               std::size_t count) {
  std::vector<std::size_t> out;
  const std::size_t slot = n / count;
  for (std::size_t t = 0; t < count; ++t)
    out.push_back(t * slot + (slot - len) / 2);
  return out;
}

inline SynthResult synthesize(const SynthSpec &spec) {
  if (spec.length < 2 || spec.plant_length < 2 || spec.plant_count < 1)
    throw ParameterError("synth: lengths and counts must be positive");
  if (spec.noise < 0.0)
    throw ParameterError("synth: noise must be >= 0");
  if (spec.plant_length * spec.plant_count > spec.length)
    throw ParameterError("synth: plants do not fit in the series");

  auto offsets = spec.offsets.empty()
                     ? spread_offsets(spec.length, spec.plant_length,
                                      spec.plant_count)
                     : spec.offsets;
  if (offsets.size() != spec.plant_count)
    throw ParameterError("synth: expected " + std::to_string(spec.plant_count) +
                         " offsets, got " + std::to_string(offsets.size()));
  for (auto off : offsets)
    if (off + spec.plant_length > spec.length)
      throw ParameterError("synth: plant at " + std::to_string(off) +
                           " runs past the end");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> x(spec.length);
  double v = 0.0;
  for (auto &e : x) {
    v += step(rng);
    e = v;
  }
  std::vector<double> pattern(spec.plant_length);
  v = 0.0;
  for (auto &e : pattern) {
    v += step(rng);
    e = v;
  }
  std::normal_distribution<double> noise(0.0, spec.noise > 0.0 ? spec.noise : 1.0);
  for (auto off : offsets) {
    // Plant relative to the local level plus a fresh step, so the window
    // starting one point earlier does not repeat across copies.
    const double base = (off > 0 ? x[off - 1] : 0.0) + step(rng) - pattern[0];
    for (std::size_t t = 0; t < spec.plant_length; ++t)
      x[off + t] = base + pattern[t] + (spec.noise > 0.0 ? noise(rng) : 0.0);
  }
  return {SeriesRecord(std::move(x), "synthetic", "seed " + std::to_string(spec.seed)),
          std::move(offsets)};
}

} // namespace valmod
