#include "surgant/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surgant/errors.hpp"
#include "surgant/rng.hpp"

namespace surgant {

namespace {

constexpr std::size_t kWorkflowSteps = 14;
constexpr std::size_t kCueChannels = 3;

// Nominal minutes per step for a 30 minute video.
constexpr double kStepWeights[kWorkflowSteps] = {2.5, 2.5, 1.5, 2.5, 2.0, 2.0, 1.5,
                                                 6.0, 1.5, 1.5, 2.0, 1.0, 2.0, 1.5};

struct Prototypes {
  std::vector<std::vector<double>> phase, step;
};

Prototypes make_prototypes(std::uint64_t seed, std::size_t dim) {
  Rng rng(splitmix64(seed ^ 0x70726f746fULL));
  Prototypes p;
  auto vec = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    return v;
  };
  for (std::size_t i = 0; i < 3; ++i) p.phase.push_back(vec());
  for (std::size_t i = 0; i < kWorkflowSteps; ++i) p.step.push_back(vec());
  return p;
}

// Spans of frames [begin, end) with their step index.
struct Span {
  std::size_t step, begin, end;
};

std::vector<Span> workflow_spans(std::size_t total, double jitter, Rng& rng) {
  std::vector<double> w(kWorkflowSteps);
  for (std::size_t s = 0; s < kWorkflowSteps; ++s) w[s] = kStepWeights[s] * rng.uniform(1.0 - jitter, 1.0 + jitter);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<Span> spans;
  std::size_t begin = 0;
  double acc = 0.0;
  for (std::size_t s = 0; s < kWorkflowSteps; ++s) {
    acc += w[s];
    std::size_t end = s + 1 == kWorkflowSteps ? total : static_cast<std::size_t>(std::llround(acc / sum * static_cast<double>(total)));
    end = std::max(end, begin + 1);
    spans.push_back({s, begin, end});
    begin = end;
  }
  return spans;
}

// Alternating mode: every span is a whole phase run; step is the phase's first step.
std::vector<Span> alternating_spans(std::size_t total, std::size_t min_dwell, std::size_t max_dwell, Rng& rng) {
  static constexpr std::size_t kFirstStep[3] = {0, 4, 8};
  const std::size_t a = rng.below(3);
  const std::size_t b = (a + 1 + rng.below(2)) % 3;
  std::vector<Span> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; begin < total; ++i) {
    const std::size_t dwell = min_dwell + rng.below(max_dwell - min_dwell + 1);
    const std::size_t end = std::min(total, begin + dwell);
    spans.push_back({kFirstStep[i % 2 == 0 ? a : b], begin, end});
    begin = end;
  }
  return spans;
}

}  // namespace

std::string synth_video_id(std::size_t index) {
  std::string id = std::to_string(index + 1);
  return id.size() < 2 ? "0" + id : id;
}

const std::vector<std::string>& step_instruments(std::size_t step_index) {
  static const std::vector<std::vector<std::string>> sets{
      {"suction", "freer elevator"},
      {"kerrisons", "surgical drill", "suction"},
      {"cottle", "freer elevator"},
      {"pituitary rongeurs", "suction"},
      {"kerrisons", "surgical drill", "stealth pointer"},
      {"bipolar forceps", "haemostatic foam", "suction"},
      {"retractable knife", "dural scissors", "micro doppler"},
      {"ring curette", "cup forceps", "suction"},
      {"spatula dissector"},
      {"cup forceps", "spatula dissector"},
      {"spatula dissector", "freer elevator"},
      {"tissue glue"},
      {"nasal cutting forceps", "irrigation syringe"},
      {"suction", "irrigation syringe"},
  };
  return sets.at(step_index);
}

std::vector<VideoAnnotations> synth_annotations(const SynthConfig& config) {
  if (config.videos == 0 || config.minutes <= 0.0) throw ConfigError("synthetic data needs videos and a positive duration");
  if (config.feature_dim < kCueChannels + 1) throw ConfigError("synthetic feature dim must be at least 4");
  if (config.mode == SynthMode::kAlternating && (config.min_dwell < 1 || config.max_dwell < config.min_dwell)) {
    throw ConfigError("alternating dwell range is empty");
  }
  const std::size_t total = static_cast<std::size_t>(std::llround(config.minutes * 60.0));
  if (total < kWorkflowSteps) throw ConfigError("synthetic videos are too short for the workflow");
  const std::size_t dim = config.feature_dim;
  const Prototypes protos = make_prototypes(config.seed, dim);
  const auto& phases = phase_classes();
  const auto& steps = step_classes();

  std::vector<VideoAnnotations> videos;
  for (std::size_t v = 0; v < config.videos; ++v) {
    Rng rng(splitmix64(config.seed + 0x9e37ULL * (v + 1)));
    const auto spans = config.mode == SynthMode::kWorkflow
                           ? workflow_spans(total, config.dwell_jitter, rng)
                           : alternating_spans(total, config.min_dwell, config.max_dwell, rng);
    // Phase runs, used for the phase-remaining times.
    std::vector<std::size_t> phase_end(spans.size());
    for (std::size_t i = spans.size(); i-- > 0;) {
      const bool same_as_next = i + 1 < spans.size() && phase_of_step(spans[i + 1].step) == phase_of_step(spans[i].step);
      phase_end[i] = same_as_next ? phase_end[i + 1] : spans[i].end;
    }
    std::vector<std::size_t> phase_begin(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const bool same_as_prev = i > 0 && phase_of_step(spans[i - 1].step) == phase_of_step(spans[i].step);
      phase_begin[i] = same_as_prev ? phase_begin[i - 1] : spans[i].begin;
    }

    VideoAnnotations video;
    video.video = synth_video_id(v);
    std::vector<double> features(total * dim);
    for (std::size_t si = 0; si < spans.size(); ++si) {
      const Span& sp = spans[si];
      const std::size_t phase = phase_of_step(sp.step);
      const auto& tools = step_instruments(sp.step);
      for (std::size_t t = sp.begin; t < sp.end; ++t) {
        FrameAnnotation f;
        f.frame = static_cast<std::int64_t>(t);
        f.phase = phases[phase];
        f.step = steps[sp.step];
        std::vector<std::string> shown;
        for (const auto& tool : tools)
          if (tool == tools.front() || rng.uniform() >= 0.1) shown.push_back(tool);
        f.instruments = std::move(shown);
        f.valid = rng.uniform() >= config.invalid_rate;
        f.minutes_step = static_cast<double>(sp.end - t) / 60.0;
        f.minutes_phase = static_cast<double>(phase_end[si] - t) / 60.0;
        f.minutes_overall = static_cast<double>(total - t) / 60.0;
        video.frames.push_back(std::move(f));

        double* row = features.data() + t * dim;
        for (std::size_t c = 0; c < dim; ++c)
          row[c] = protos.phase[phase][c] + protos.step[sp.step][c] + config.noise * rng.normal();
        if (config.mode == SynthMode::kWorkflow) {
          row[dim - 3] = static_cast<double>(t - sp.begin) / 300.0 + 0.01 * rng.normal();
          row[dim - 2] = static_cast<double>(t - phase_begin[si]) / 900.0 + 0.01 * rng.normal();
          row[dim - 1] = static_cast<double>(t) / static_cast<double>(total) + 0.01 * rng.normal();
        }
      }
    }
    video.features = Tensor::matrix(total, dim, std::move(features));
    videos.push_back(std::move(video));
  }
  return videos;
}

}  // namespace surgant
