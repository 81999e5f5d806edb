#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surgant/dataset.hpp"

namespace surgant {

enum class SynthMode {
  // Canonical step order with jittered dwell times.
  kWorkflow,
  // Each video bounces between two phases with dwells of a few frames, so the
  // phase that follows a clip depends on which phase came last.
  kAlternating,
};

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t videos = 10;
  double minutes = 30.0;
  std::size_t feature_dim = 32;
  double noise = 0.5;
  double invalid_rate = 0.002;
  double dwell_jitter = 0.15;   // relative, workflow mode
  SynthMode mode = SynthMode::kWorkflow;
  std::size_t min_dwell = 2;    // frames, alternating mode
  std::size_t max_dwell = 6;
};

std::string synth_video_id(std::size_t index);   // 0 -> "01"

// Instruments the synthetic videos show during each non-terminal step.
const std::vector<std::string>& step_instruments(std::size_t step_index);

// Deterministic in the config. Features are phase and step prototypes plus
// Gaussian noise; the last three channels carry elapsed-time cues.
std::vector<VideoAnnotations> synth_annotations(const SynthConfig& config);

}  // namespace surgant
