#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surgant/tensor.hpp"

namespace surgant {

// Closed label vocabularies; the last phase/step entries are the
// "nothing follows" classes.
const std::vector<std::string>& phase_classes();
const std::vector<std::string>& step_classes();
const std::vector<std::string>& instrument_classes();
inline const std::string kEndOfPhase = "end of phase";
inline const std::string kEndOfStep = "end of step";
// Index into phase_classes() of the phase a step belongs to.
std::size_t phase_of_step(std::size_t step_index);

enum class Category { kFuturePhase, kFutureStep, kFutureInstrument, kTime };
enum class TimeScope { kNone, kPhase, kStep, kOverall };

std::string category_name(Category c);    // "future-phase", ..., "time"
Category parse_category(const std::string& name);
std::string scope_name(TimeScope s);      // "", "phase", "step", "overall"
TimeScope parse_scope(const std::string& name);

struct FrameAnnotation {
  std::int64_t frame = 0;
  std::optional<std::string> phase;
  std::optional<std::string> step;
  std::optional<std::vector<std::string>> instruments;
  bool valid = true;
  std::optional<double> minutes_phase;
  std::optional<double> minutes_step;
  std::optional<double> minutes_overall;
};

struct VideoAnnotations {
  std::string video;
  std::vector<FrameAnnotation> frames;   // sorted by frame index
  Tensor features;                       // [frames x D], row i belongs to frames[i]
};

// CSV columns: frame,phase,step,instruments,valid,min_phase,min_step,min_overall
// with ';' between instruments and an empty cell for a missing value.
void write_annotation_csv(const std::string& path, const std::vector<FrameAnnotation>& frames);
std::vector<FrameAnnotation> read_annotation_csv(const std::string& path);

// Directory layout: <video>.csv plus <video>.feat (ANTF1 tensor "features").
void write_video(const std::string& dir, const VideoAnnotations& video);
VideoAnnotations read_video(const std::string& dir, const std::string& video);
std::vector<std::string> list_videos(const std::string& dir);
std::vector<VideoAnnotations> read_annotation_dir(const std::string& dir);

struct VideoClip {
  std::string video;
  std::int64_t t_end = 0;     // frame index of the last frame
  std::size_t k = 0;
  std::size_t end_row = 0;    // row of the last frame in VideoAnnotations::frames
};

// Stride-s windows of k index-contiguous valid frames. Throws ConfigError for k or stride < 1.
std::vector<VideoClip> build_clips(const VideoAnnotations& video, std::size_t k, std::size_t stride = 1);
// Rows [end_row - k + 1, end_row] of the video's features.
Tensor clip_features(const VideoAnnotations& video, const VideoClip& clip);

// What follows each frame: the next phase/step run (or the end-of classes)
// and the instrument union of the next step run.
struct FutureLabels {
  std::optional<std::string> phase;
  std::optional<std::string> step;
  std::optional<std::vector<std::string>> instruments;   // absent at the last step
};
std::vector<FutureLabels> derive_future_labels(const std::vector<FrameAnnotation>& frames);

struct QaTemplate {
  Category category = Category::kFuturePhase;
  TimeScope scope = TimeScope::kNone;
  std::string question;
  std::string answer;   // contains "{answer}" exactly once

  std::string render(const std::string& label) const;
};

// Text asset: first line "#version 1"; then `tag | question | answer` lines
// where tag is a category name or time:<scope>. Blank and '#' lines ignored.
struct TemplateSet {
  int version = 1;
  std::vector<QaTemplate> templates;

  static TemplateSet parse(const std::string& text);
  static TemplateSet load(const std::string& path);
  static TemplateSet builtin();
  std::string serialize() const;
};

std::string default_templates_path();

// Round-half-up integer minutes, e.g. 23.13 -> "23 minutes".
std::string render_minutes(double minutes);
// Sorted, comma separated.
std::string render_instruments(std::vector<std::string> instruments);

struct QAItem {
  std::string video;
  std::int64_t t_end = 0;
  std::size_t k = 0;
  Category category = Category::kFuturePhase;
  TimeScope scope = TimeScope::kNone;
  std::string question;
  std::string answer;
  std::string label;      // categorical gold class (rendered instrument list)
  double minutes = 0.0;   // gold remaining minutes for time items
  std::size_t template_index = 0;
  std::size_t end_row = 0;
};

struct QaCounts {
  std::size_t emitted = 0;
  std::size_t skipped_missing = 0;    // annotation field absent
  std::size_t not_applicable = 0;     // e.g. instruments after the final step
};

std::vector<QAItem> generate_qa(const VideoAnnotations& video, const std::vector<FutureLabels>& future,
                                const VideoClip& clip, const TemplateSet& templates, QaCounts& counts);

// (video, t_end, category, template index)
void sort_canonical(std::vector<QAItem>& items);

struct Dataset {
  std::vector<VideoClip> clips;
  std::vector<QAItem> items;
  QaCounts counts;
};
Dataset build_dataset(const std::vector<VideoAnnotations>& videos, const TemplateSet& templates, std::size_t k);

struct Split {
  std::vector<QAItem> train;
  std::vector<QAItem> test;
};
// Throws ConfigError when a test id is not among `known_videos`.
Split split_by_video(const std::vector<QAItem>& items, const std::vector<std::string>& test_videos,
                     const std::vector<std::string>& known_videos);
std::vector<std::string> default_test_videos();

// One JSON object per line, LF endings.
std::string to_jsonl_line(const QAItem& item);
QAItem from_jsonl_line(const std::string& line);
void write_jsonl(const std::string& path, const std::vector<QAItem>& items);
std::vector<QAItem> read_jsonl(const std::string& path);

struct DatasetStats {
  std::size_t total = 0;
  std::size_t per_category[4] = {0, 0, 0, 0};
  std::size_t per_scope[3] = {0, 0, 0};
  std::size_t train = 0, test = 0;
  std::size_t clips = 0;
  QaCounts counts;

  double time_fraction() const { return total ? static_cast<double>(per_category[3]) / static_cast<double>(total) : 0.0; }
  std::string to_json() const;
};
DatasetStats compute_stats(const Dataset& dataset, const Split& split);

}  // namespace surgant
