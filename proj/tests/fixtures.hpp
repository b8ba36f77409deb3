#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "data_io.hpp"
#include "run.hpp"
#include "synth.hpp"

namespace fixtures {

/// Ground-truth run on a 1 s grid, optionally with measurement noise.
inline lumpfit::ExperimentRun synthetic_run(double duration, double ramp, double hold,
                                            double noise_sigma, std::uint64_t noise_seed,
                                            std::string id = "fixture") {
  lumpfit::synth::GroundTruthSpec spec;
  lumpfit::synth::RunShape shape{ramp, hold, duration};
  auto fine = lumpfit::synth::simulate_run(spec, shape, std::move(id));
  auto run = lumpfit::io::resample(lumpfit::io::to_record(fine), 1.0);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  if (noise_sigma > 0.0) {
    for (std::size_t j = 1; j < run.size(); ++j) run.temperatures[j] += noise(rng);
  }
  return run;
}

}  // namespace fixtures
