#include "surgant/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "surgant/checkpoint.hpp"
#include "surgant/errors.hpp"

namespace surgant {

namespace {

constexpr const char* kCsvHeader = "frame,phase,step,instruments,valid,min_phase,min_step,min_overall";
constexpr const char* kFeatureTensor = "features";
constexpr const char* kAnswerSlot = "{answer}";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(where + ": bad number '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError(where + ": bad integer '" + s + "'");
  return v;
}

void require_member(const std::vector<std::string>& vocab, const std::string& value, const std::string& where) {
  if (std::find(vocab.begin(), vocab.end(), value) == vocab.end()) {
    throw FormatError(where + ": unknown label '" + value + "'");
  }
}

// Maximal runs of equal labels over the frames that carry the label.
struct Run {
  std::string label;
  std::vector<std::size_t> rows;
};

template <typename Get>
std::vector<Run> label_runs(const std::vector<FrameAnnotation>& frames, Get get) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::optional<std::string>& label = get(frames[i]);
    if (!label) continue;
    if (runs.empty() || runs.back().label != *label) runs.push_back({*label, {}});
    runs.back().rows.push_back(i);
  }
  return runs;
}

}  // namespace

const std::vector<std::string>& phase_classes() {
  static const std::vector<std::string> v{"nasal sphenoid", "sellar", "closure", kEndOfPhase};
  return v;
}

const std::vector<std::string>& step_classes() {
  static const std::vector<std::string> v{
      "nasal corridor creation", "anterior sphenoidotomy",   "septum displacement", "sphenoid sinus clearance",
      "sellotomy",               "haemostasis",              "durotomy",            "tumour excision",
      "synthetic graft placement", "fat graft placement",    "gasket seal construct", "dural sealant",
      "nasal packing",           "debris clearance",         kEndOfStep};
  return v;
}

const std::vector<std::string>& instrument_classes() {
  static const std::vector<std::string> v{
      "suction",         "freer elevator",     "pituitary rongeurs", "spatula dissector", "kerrisons",
      "cottle",          "haemostatic foam",   "micro doppler",      "nasal cutting forceps", "stealth pointer",
      "irrigation syringe", "retractable knife", "dural scissors",   "ring curette",      "cup forceps",
      "bipolar forceps", "tissue glue",        "surgical drill"};
  return v;
}

std::size_t phase_of_step(std::size_t step_index) {
  if (step_index < 4) return 0;
  if (step_index < 8) return 1;
  if (step_index < 14) return 2;
  throw IndexError("step index " + std::to_string(step_index) + " has no phase");
}

std::string category_name(Category c) {
  switch (c) {
    case Category::kFuturePhase: return "future-phase";
    case Category::kFutureStep: return "future-step";
    case Category::kFutureInstrument: return "future-instrument";
    case Category::kTime: return "time";
  }
  return "";
}

Category parse_category(const std::string& name) {
  for (Category c : {Category::kFuturePhase, Category::kFutureStep, Category::kFutureInstrument, Category::kTime})
    if (category_name(c) == name) return c;
  throw FormatError("unknown question category '" + name + "'");
}

std::string scope_name(TimeScope s) {
  switch (s) {
    case TimeScope::kNone: return "";
    case TimeScope::kPhase: return "phase";
    case TimeScope::kStep: return "step";
    case TimeScope::kOverall: return "overall";
  }
  return "";
}

TimeScope parse_scope(const std::string& name) {
  for (TimeScope s : {TimeScope::kPhase, TimeScope::kStep, TimeScope::kOverall})
    if (scope_name(s) == name) return s;
  throw FormatError("unknown time scope '" + name + "'");
}

void write_annotation_csv(const std::string& path, const std::vector<FrameAnnotation>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << kCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& f : frames) {
    std::string instruments;
    if (f.instruments && f.instruments->empty()) {
      instruments = "-";
    } else if (f.instruments) {
      for (std::size_t i = 0; i < f.instruments->size(); ++i) instruments += (i ? ";" : "") + (*f.instruments)[i];
    }
    out << f.frame << ',' << f.phase.value_or("") << ',' << f.step.value_or("") << ',' << instruments << ','
        << (f.valid ? 1 : 0) << ',' << opt(f.minutes_phase) << ',' << opt(f.minutes_step) << ','
        << opt(f.minutes_overall) << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

// An empty instrument cell means the field is missing; "-" is an explicit empty set.
std::vector<FrameAnnotation> read_annotation_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw FormatError(path + ": unexpected CSV header");
  std::vector<FrameAnnotation> frames;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    auto cells = split(line, ',');
    if (cells.size() != 8) throw FormatError(where + ": expected 8 columns, got " + std::to_string(cells.size()));
    for (auto& c : cells) c = trim(c);
    FrameAnnotation f;
    f.frame = parse_int(cells[0], where);
    if (!cells[1].empty()) {
      require_member(phase_classes(), cells[1], where);
      f.phase = cells[1];
    }
    if (!cells[2].empty()) {
      require_member(step_classes(), cells[2], where);
      f.step = cells[2];
    }
    if (cells[3] == "-") {
      f.instruments = std::vector<std::string>{};
    } else if (!cells[3].empty()) {
      std::vector<std::string> names;
      for (auto& name : split(cells[3], ';')) {
        name = trim(name);
        require_member(instrument_classes(), name, where);
        names.push_back(name);
      }
      f.instruments = std::move(names);
    }
    if (cells[4] != "0" && cells[4] != "1") throw FormatError(where + ": valid flag must be 0 or 1");
    f.valid = cells[4] == "1";
    if (!cells[5].empty()) f.minutes_phase = parse_double(cells[5], where);
    if (!cells[6].empty()) f.minutes_step = parse_double(cells[6], where);
    if (!cells[7].empty()) f.minutes_overall = parse_double(cells[7], where);
    for (const auto& m : {f.minutes_phase, f.minutes_step, f.minutes_overall})
      if (m && *m < 0.0) throw FormatError(where + ": negative remaining minutes");
    if (!frames.empty() && f.frame <= frames.back().frame) throw FormatError(where + ": frame indices must increase");
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_video(const std::string& dir, const VideoAnnotations& video) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir) / video.video;
  write_annotation_csv(base.string() + ".csv", video.frames);
  save_checkpoint(base.string() + ".feat", {{kFeatureTensor, video.features}});
}

VideoAnnotations read_video(const std::string& dir, const std::string& video) {
  const auto base = std::filesystem::path(dir) / video;
  VideoAnnotations v;
  v.video = video;
  v.frames = read_annotation_csv(base.string() + ".csv");
  const auto tensors = load_checkpoint(base.string() + ".feat");
  if (tensors.size() != 1 || tensors[0].name != kFeatureTensor || tensors[0].tensor.rank() != 2) {
    throw FormatError(base.string() + ".feat: expected a single 2-D 'features' tensor");
  }
  v.features = tensors[0].tensor;
  if (v.features.rows() != v.frames.size()) {
    throw FormatError(video + ": " + std::to_string(v.features.rows()) + " feature rows for " +
                      std::to_string(v.frames.size()) + " annotated frames");
  }
  return v;
}

std::vector<std::string> list_videos(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("annotation directory not found: " + dir);
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw InputError("no <video>.csv annotation files in " + dir);
  return ids;
}

std::vector<VideoAnnotations> read_annotation_dir(const std::string& dir) {
  std::vector<VideoAnnotations> videos;
  for (const auto& id : list_videos(dir)) videos.push_back(read_video(dir, id));
  return videos;
}

std::vector<VideoClip> build_clips(const VideoAnnotations& video, std::size_t k, std::size_t stride) {
  if (k < 1) throw ConfigError("clip length must be at least 1");
  if (stride < 1) throw ConfigError("clip stride must be at least 1");
  std::vector<VideoClip> clips;
  std::size_t run = 0;      // valid, index-contiguous frames ending at i
  std::size_t since = 0;    // eligible ends since the last emitted clip
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    const auto& f = video.frames[i];
    const bool contiguous = i > 0 && f.frame == video.frames[i - 1].frame + 1;
    run = f.valid ? (contiguous ? run + 1 : 1) : 0;
    if (!f.valid || !contiguous) since = 0;
    if (run >= k) {
      if (since % stride == 0) clips.push_back({video.video, f.frame, k, i});
      ++since;
    }
  }
  return clips;
}

Tensor clip_features(const VideoAnnotations& video, const VideoClip& clip) {
  const std::size_t d = video.features.cols();
  const auto src = video.features.data();
  const std::size_t begin = clip.end_row + 1 - clip.k;
  std::vector<double> out(src.begin() + static_cast<std::ptrdiff_t>(begin * d),
                          src.begin() + static_cast<std::ptrdiff_t>((clip.end_row + 1) * d));
  return Tensor::matrix(clip.k, d, std::move(out));
}

std::vector<FutureLabels> derive_future_labels(const std::vector<FrameAnnotation>& frames) {
  std::vector<FutureLabels> out(frames.size());
  const auto phases = label_runs(frames, [](const FrameAnnotation& f) -> const auto& { return f.phase; });
  const auto steps = label_runs(frames, [](const FrameAnnotation& f) -> const auto& { return f.step; });
  for (std::size_t r = 0; r < phases.size(); ++r) {
    const std::string next = r + 1 < phases.size() ? phases[r + 1].label : kEndOfPhase;
    for (std::size_t row : phases[r].rows) out[row].phase = next;
  }
  for (std::size_t r = 0; r < steps.size(); ++r) {
    const std::string next = r + 1 < steps.size() ? steps[r + 1].label : kEndOfStep;
    std::optional<std::vector<std::string>> tools;
    if (r + 1 < steps.size()) {
      std::set<std::string> names;
      bool any = false;
      for (std::size_t row : steps[r + 1].rows) {
        if (!frames[row].instruments) continue;
        any = true;
        names.insert(frames[row].instruments->begin(), frames[row].instruments->end());
      }
      if (any && !names.empty()) tools = std::vector<std::string>(names.begin(), names.end());
    }
    for (std::size_t row : steps[r].rows) {
      out[row].step = next;
      out[row].instruments = tools;
    }
  }
  return out;
}

std::string QaTemplate::render(const std::string& label) const {
  const auto pos = answer.find(kAnswerSlot);
  return answer.substr(0, pos) + label + answer.substr(pos + std::string(kAnswerSlot).size());
}

TemplateSet TemplateSet::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  TemplateSet set;
  bool have_version = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    const std::string where = "templates:" + std::to_string(line_no);
    if (!have_version) {
      if (t.empty()) continue;
      if (t.rfind("#version ", 0) != 0) throw FormatError(where + ": first line must be '#version <n>'");
      set.version = static_cast<int>(parse_int(trim(t.substr(9)), where));
      if (set.version != 1) throw FormatError(where + ": unsupported template version " + std::to_string(set.version));
      have_version = true;
      continue;
    }
    if (t.empty() || t[0] == '#') continue;
    auto cells = split(t, '|');
    if (cells.size() != 3) throw FormatError(where + ": expected 'tag | question | answer'");
    for (auto& c : cells) c = trim(c);
    QaTemplate q;
    const std::string& tag = cells[0];
    if (tag.rfind("time:", 0) == 0) {
      q.category = Category::kTime;
      q.scope = parse_scope(tag.substr(5));
    } else {
      q.category = parse_category(tag);
      if (q.category == Category::kTime) throw FormatError(where + ": time templates need a scope (time:phase|step|overall)");
    }
    q.question = cells[1];
    q.answer = cells[2];
    const auto first = q.answer.find(kAnswerSlot);
    if (q.question.empty() || first == std::string::npos || q.answer.find(kAnswerSlot, first + 1) != std::string::npos) {
      throw FormatError(where + ": answer must contain {answer} exactly once");
    }
    set.templates.push_back(std::move(q));
  }
  if (!have_version) throw FormatError("template file has no '#version' line");
  if (set.templates.empty()) throw FormatError("template file defines no templates");
  return set;
}

TemplateSet TemplateSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open template file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

TemplateSet TemplateSet::builtin() {
  return parse(
      "#version 1\n"
      "future-phase | What is the next surgical phase? | The next phase is {answer}\n"
      "future-step | What is the next surgical step? | The next step is {answer}\n"
      "future-instrument | What instruments will be needed in the next step? | The next step needs {answer}\n"
      "future-instrument | Which instruments should be prepared next? | Prepare {answer}\n"
      "time:phase | How long is left for the current phase? | {answer} left in this phase\n"
      "time:step | How long is left for the current step? | {answer} left in this step\n"
      "time:overall | How long until the surgery ends? | {answer} left in the surgery\n");
}

std::string TemplateSet::serialize() const {
  std::string out = "#version " + std::to_string(version) + "\n";
  for (const auto& t : templates) {
    const std::string tag = t.category == Category::kTime ? "time:" + scope_name(t.scope) : category_name(t.category);
    out += tag + " | " + t.question + " | " + t.answer + "\n";
  }
  return out;
}

std::string default_templates_path() { return std::string(SURGANT_ASSETS_DIR) + "/templates.txt"; }

std::string render_minutes(double minutes) {
  const auto whole = static_cast<long long>(std::floor(minutes + 0.5));
  return std::to_string(whole) + " minutes";
}

std::string render_instruments(std::vector<std::string> instruments) {
  std::sort(instruments.begin(), instruments.end());
  instruments.erase(std::unique(instruments.begin(), instruments.end()), instruments.end());
  std::string out;
  for (std::size_t i = 0; i < instruments.size(); ++i) out += (i ? ", " : "") + instruments[i];
  return out;
}

std::vector<QAItem> generate_qa(const VideoAnnotations& video, const std::vector<FutureLabels>& future,
                                const VideoClip& clip, const TemplateSet& templates, QaCounts& counts) {
  const FrameAnnotation& last = video.frames.at(clip.end_row);
  const FutureLabels& next = future.at(clip.end_row);
  std::vector<QAItem> items;
  for (std::size_t ti = 0; ti < templates.templates.size(); ++ti) {
    const QaTemplate& t = templates.templates[ti];
    QAItem item;
    item.video = clip.video;
    item.t_end = clip.t_end;
    item.k = clip.k;
    item.category = t.category;
    item.scope = t.scope;
    item.question = t.question;
    item.template_index = ti;
    item.end_row = clip.end_row;
    std::optional<std::string> label;
    switch (t.category) {
      case Category::kFuturePhase:
        label = next.phase;
        break;
      case Category::kFutureStep:
        label = next.step;
        break;
      case Category::kFutureInstrument:
        if (next.instruments) {
          label = render_instruments(*next.instruments);
        } else if (next.step == kEndOfStep) {
          ++counts.not_applicable;
          continue;
        }
        break;
      case Category::kTime: {
        const std::optional<double>& m = t.scope == TimeScope::kPhase  ? last.minutes_phase
                                         : t.scope == TimeScope::kStep ? last.minutes_step
                                                                       : last.minutes_overall;
        if (m) {
          item.minutes = *m;
          label = render_minutes(*m);
        }
        break;
      }
    }
    if (!label) {
      ++counts.skipped_missing;
      continue;
    }
    item.label = *label;
    item.answer = t.render(*label);
    items.push_back(std::move(item));
    ++counts.emitted;
  }
  return items;
}

void sort_canonical(std::vector<QAItem>& items) {
  std::stable_sort(items.begin(), items.end(), [](const QAItem& a, const QAItem& b) {
    return std::tie(a.video, a.t_end, a.category, a.template_index) <
           std::tie(b.video, b.t_end, b.category, b.template_index);
  });
}

Dataset build_dataset(const std::vector<VideoAnnotations>& videos, const TemplateSet& templates, std::size_t k) {
  Dataset ds;
  for (const auto& v : videos) {
    const auto future = derive_future_labels(v.frames);
    for (const auto& clip : build_clips(v, k)) {
      auto items = generate_qa(v, future, clip, templates, ds.counts);
      ds.items.insert(ds.items.end(), std::make_move_iterator(items.begin()), std::make_move_iterator(items.end()));
      ds.clips.push_back(clip);
    }
  }
  sort_canonical(ds.items);
  return ds;
}

std::vector<std::string> default_test_videos() { return {"02", "06", "12", "13", "24"}; }

Split split_by_video(const std::vector<QAItem>& items, const std::vector<std::string>& test_videos,
                     const std::vector<std::string>& known_videos) {
  const std::set<std::string> known(known_videos.begin(), known_videos.end());
  for (const auto& id : test_videos)
    if (!known.count(id)) throw ConfigError("test video '" + id + "' is not in the dataset");
  const std::set<std::string> test(test_videos.begin(), test_videos.end());
  Split s;
  for (const auto& item : items) (test.count(item.video) ? s.test : s.train).push_back(item);
  return s;
}

std::string to_jsonl_line(const QAItem& item) {
  nlohmann::ordered_json j;
  j["video"] = item.video;
  j["t_end"] = item.t_end;
  j["k"] = item.k;
  j["category"] = category_name(item.category);
  j["question"] = item.question;
  j["answer"] = item.answer;
  if (item.category == Category::kTime) {
    j["label"] = item.minutes;
    j["scope"] = scope_name(item.scope);
  } else {
    j["label"] = item.label;
  }
  return j.dump();
}

QAItem from_jsonl_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    QAItem item;
    item.video = j.at("video").get<std::string>();
    item.t_end = j.at("t_end").get<std::int64_t>();
    item.k = j.at("k").get<std::size_t>();
    item.category = parse_category(j.at("category").get<std::string>());
    item.question = j.at("question").get<std::string>();
    item.answer = j.at("answer").get<std::string>();
    if (item.category == Category::kTime) {
      item.minutes = j.at("label").get<double>();
      item.scope = parse_scope(j.at("scope").get<std::string>());
      item.label = render_minutes(item.minutes);
    } else {
      item.label = j.at("label").get<std::string>();
    }
    return item;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad JSONL record: ") + e.what());
  }
}

void write_jsonl(const std::string& path, const std::vector<QAItem>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& item : items) out << to_jsonl_line(item) << '\n';
  if (!out) throw InputError("failed writing " + path);
}

std::vector<QAItem> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<QAItem> items;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) items.push_back(from_jsonl_line(line));
  return items;
}

DatasetStats compute_stats(const Dataset& dataset, const Split& split) {
  DatasetStats s;
  s.total = dataset.items.size();
  s.clips = dataset.clips.size();
  s.counts = dataset.counts;
  s.train = split.train.size();
  s.test = split.test.size();
  for (const auto& item : dataset.items) {
    ++s.per_category[static_cast<int>(item.category)];
    if (item.category == Category::kTime) ++s.per_scope[static_cast<int>(item.scope) - 1];
  }
  return s;
}

std::string DatasetStats::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["clips"] = clips;
  nlohmann::ordered_json cats;
  for (Category c : {Category::kFuturePhase, Category::kFutureStep, Category::kFutureInstrument, Category::kTime})
    cats[category_name(c)] = per_category[static_cast<int>(c)];
  j["categories"] = cats;
  nlohmann::ordered_json scopes;
  for (TimeScope sc : {TimeScope::kPhase, TimeScope::kStep, TimeScope::kOverall})
    scopes[scope_name(sc)] = per_scope[static_cast<int>(sc) - 1];
  j["time_scopes"] = scopes;
  j["time_fraction"] = time_fraction();
  j["train"] = train;
  j["test"] = test;
  j["skipped_missing"] = counts.skipped_missing;
  j["not_applicable"] = counts.not_applicable;
  return j.dump(2) + "\n";
}

}  // namespace surgant
