#include "surgant/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"
#include "surgant/errors.hpp"
#include "surgant/vocab.hpp"

namespace surgant {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": " + std::to_string(a) + " candidates vs " + std::to_string(b) +
                     " references");
  }
}

std::map<Tokens, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

struct MeteorSearch {
  const Tokens& cand;
  const Tokens& ref;
  std::size_t target = 0;
  std::vector<bool> used;
  std::size_t best_chunks = std::numeric_limits<std::size_t>::max();

  // Largest number of matches still reachable from candidate position i.
  std::size_t reachable(std::size_t i) const {
    std::map<std::string, std::ptrdiff_t> avail;
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (!used[j]) ++avail[ref[j]];
    std::size_t n = 0;
    for (std::size_t k = i; k < cand.size(); ++k) {
      auto it = avail.find(cand[k]);
      if (it != avail.end() && it->second > 0) {
        --it->second;
        ++n;
      }
    }
    return n;
  }

  void run(std::size_t i, std::size_t matches, std::size_t chunks, std::ptrdiff_t prev_ref) {
    if (chunks >= best_chunks) return;
    if (matches + reachable(i) < target) return;
    if (i == cand.size()) {
      best_chunks = chunks;
      return;
    }
    // Continuing the current chunk first finds good bounds early.
    if (prev_ref >= 0) {
      const auto j = static_cast<std::size_t>(prev_ref + 1);
      if (j < ref.size() && !used[j] && ref[j] == cand[i]) {
        used[j] = true;
        run(i + 1, matches + 1, chunks, prev_ref + 1);
        used[j] = false;
      }
    }
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (used[j] || ref[j] != cand[i] || static_cast<std::ptrdiff_t>(j) == prev_ref + 1) continue;
      used[j] = true;
      run(i + 1, matches + 1, chunks + 1, static_cast<std::ptrdiff_t>(j));
      used[j] = false;
    }
    run(i + 1, matches, chunks, -2);
  }
};

const std::vector<std::string>& class_vocab(Category c) {
  switch (c) {
    case Category::kFuturePhase: return phase_classes();
    case Category::kFutureStep: return step_classes();
    case Category::kFutureInstrument: return instrument_classes();
    case Category::kTime: break;
  }
  throw ConfigError("time answers have no class vocabulary");
}

std::size_t accuracy_slot(Category c) {
  switch (c) {
    case Category::kFutureInstrument: return 0;
    case Category::kFutureStep: return 1;
    case Category::kFuturePhase: return 2;
    case Category::kTime: break;
  }
  throw ConfigError("time answers have no accuracy slot");
}

nlohmann::ordered_json text_json(const TextScores& s) {
  nlohmann::ordered_json j;
  j["bleu1"] = s.bleu[0];
  j["bleu2"] = s.bleu[1];
  j["bleu3"] = s.bleu[2];
  j["bleu4"] = s.bleu[3];
  j["rougeL"] = s.rouge_l;
  j["meteor"] = s.meteor;
  j["count"] = s.count;
  return j;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); }

}  // namespace

Tokens metric_tokens(const std::string& text) { return split_words(text); }

double bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, int n) {
  require_aligned(candidates.size(), references.size(), "bleu");
  if (n < 1 || n > 4) throw ConfigError("BLEU order must lie in 1..4");
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    cand_len += candidates[s].size();
    ref_len += references[s].size();
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int order = 1; order <= n; ++order) {
    std::size_t matched = 0, total = 0;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      const auto ref_counts = ngram_counts(references[s], static_cast<std::size_t>(order));
      for (const auto& [gram, count] : ngram_counts(candidates[s], static_cast<std::size_t>(order))) {
        total += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched += std::min(count, it->second);
      }
    }
    const double precision = matched > 0 ? static_cast<double>(matched) / static_cast<double>(total) : kBleuEpsilon;
    log_sum += std::log(precision);
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_sum / n);
}

std::array<double, 4> bleu_1_to_4(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  return {bleu(candidates, references, 1), bleu(candidates, references, 2), bleu(candidates, references, 3),
          bleu(candidates, references, 4)};
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size()), r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l_corpus(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  require_aligned(candidates.size(), references.size(), "rouge_l");
  if (candidates.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += rouge_l(candidates[i], references[i]);
  return total / static_cast<double>(candidates.size());
}

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference) {
  MeteorSearch search{candidate, reference, 0, std::vector<bool>(reference.size(), false),
                      std::numeric_limits<std::size_t>::max()};
  search.target = search.reachable(0);
  if (search.target == 0) return {};
  search.run(0, 0, 0, -2);
  return {search.target, search.best_chunks};
}

double meteor(const Tokens& candidate, const Tokens& reference) {
  const auto a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size()), r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_corpus(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  require_aligned(candidates.size(), references.size(), "meteor");
  if (candidates.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += meteor(candidates[i], references[i]);
  return total / static_cast<double>(candidates.size());
}

std::vector<std::string> extract_classes(const std::string& text, Category category) {
  const Tokens tokens = metric_tokens(text);
  std::vector<std::pair<Tokens, std::string>> names;
  for (const auto& name : class_vocab(category)) names.emplace_back(metric_tokens(name), name);
  std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  std::set<std::string> found;
  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t advance = 1;
    for (const auto& [words, name] : names) {
      if (i + words.size() <= tokens.size() && std::equal(words.begin(), words.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        found.insert(name);
        advance = words.size();
        break;
      }
    }
    i += advance;
  }
  return {found.begin(), found.end()};
}

double category_accuracy(std::span<const std::string> predictions, std::span<const std::string> gold_labels,
                         Category category) {
  require_aligned(predictions.size(), gold_labels.size(), "category_accuracy");
  if (predictions.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto gold = extract_classes(gold_labels[i], category);
    correct += !gold.empty() && extract_classes(predictions[i], category) == gold;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::optional<double> parse_minutes(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') continue;
    std::size_t j = i;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
    if (j + 1 < text.size() && text[j] == '.' && text[j + 1] >= '0' && text[j + 1] <= '9') {
      ++j;
      while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
    }
    return std::stod(text.substr(i, j - i));
  }
  return std::nullopt;
}

TimeMae time_mae(std::span<const std::string> predictions, std::span<const double> gold_minutes) {
  require_aligned(predictions.size(), gold_minutes.size(), "time_mae");
  TimeMae out;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto value = parse_minutes(predictions[i]);
    if (!value) {
      ++out.unparseable;
      continue;
    }
    total += std::abs(*value - gold_minutes[i]);
    ++out.scored;
  }
  if (out.scored == 0) throw UndefinedMetricError("time MAE undefined: no prediction contains a number");
  out.mae = total / static_cast<double>(out.scored);
  return out;
}

TextScores score_text(std::span<const std::string> predictions, std::span<const std::string> references) {
  require_aligned(predictions.size(), references.size(), "score_text");
  std::vector<Tokens> cand, ref;
  for (const auto& p : predictions) cand.push_back(metric_tokens(p));
  for (const auto& r : references) ref.push_back(metric_tokens(r));
  TextScores s;
  s.count = predictions.size();
  if (s.count == 0) return s;
  s.bleu = bleu_1_to_4(cand, ref);
  s.rouge_l = rouge_l_corpus(cand, ref);
  s.meteor = meteor_corpus(cand, ref);
  return s;
}

std::optional<double> MetricReport::accuracy_for(Category c) const { return accuracy[accuracy_slot(c)]; }

MetricReport evaluate(std::span<const std::string> predictions, std::span<const QAItem> gold) {
  require_aligned(predictions.size(), gold.size(), "evaluate");
  MetricReport report;
  std::vector<std::string> refs;
  for (const auto& g : gold) refs.push_back(g.answer);
  report.overall = score_text(predictions, refs);

  for (Category c : {Category::kFuturePhase, Category::kFutureStep, Category::kFutureInstrument, Category::kTime}) {
    std::vector<std::string> preds, answers, labels;
    std::array<std::vector<std::string>, 3> scope_preds;
    std::array<std::vector<double>, 3> scope_gold;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i].category != c) continue;
      preds.push_back(predictions[i]);
      answers.push_back(gold[i].answer);
      labels.push_back(gold[i].label);
      if (c == Category::kTime) {
        const auto slot = static_cast<std::size_t>(gold[i].scope) - 1;
        scope_preds[slot].push_back(predictions[i]);
        scope_gold[slot].push_back(gold[i].minutes);
      }
    }
    if (preds.empty()) continue;
    report.per_category[static_cast<std::size_t>(c)] = score_text(preds, answers);
    if (c != Category::kTime) {
      report.accuracy[accuracy_slot(c)] = category_accuracy(preds, labels, c);
      report.accuracy_count[accuracy_slot(c)] = preds.size();
      continue;
    }
    for (std::size_t s = 0; s < 3; ++s) {
      if (scope_preds[s].empty()) continue;
      try {
        const auto m = time_mae(scope_preds[s], scope_gold[s]);
        report.mae_minutes[s] = m.mae;
        report.mae_scored[s] = m.scored;
        report.mae_unparseable[s] = m.unparseable;
      } catch (const UndefinedMetricError&) {
        report.mae_unparseable[s] = scope_preds[s].size();
      }
    }
  }
  return report;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["overall"] = text_json(overall);
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (Category c : {Category::kFuturePhase, Category::kFutureStep, Category::kFutureInstrument, Category::kTime}) {
    const auto& s = per_category[static_cast<std::size_t>(c)];
    if (s) cats[category_name(c)] = text_json(*s);
  }
  j["per_category"] = cats;
  nlohmann::ordered_json acc;
  const char* acc_names[] = {"future-instrument", "future-step", "future-phase"};
  for (std::size_t i = 0; i < 3; ++i) acc[acc_names[i]] = {{"accuracy", optional_json(accuracy[i])}, {"count", accuracy_count[i]}};
  j["accuracy"] = acc;
  nlohmann::ordered_json mae;
  const char* scopes[] = {"phase", "step", "overall"};
  for (std::size_t i = 0; i < 3; ++i) {
    nlohmann::ordered_json m;
    m["mae_minutes"] = optional_json(mae_minutes[i]);
    m["scored"] = mae_scored[i];
    m["unparseable"] = mae_unparseable[i];
    mae[scopes[i]] = m;
  }
  j["time"] = mae;
  return j.dump(2) + "\n";
}

std::string MetricReport::to_table() const {
  auto pct = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("n/a");
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
    return std::string(buf);
  };
  auto minutes = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("n/a");
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return std::string(buf);
  };
  std::string out = "B-1     B-2     B-3     B-4     R-L     MET\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-7.2f %-7.2f %-7.2f %-7.2f %-7.2f %-7.2f\n", 100 * overall.bleu[0],
                100 * overall.bleu[1], 100 * overall.bleu[2], 100 * overall.bleu[3], 100 * overall.rouge_l,
                100 * overall.meteor);
  out += line;
  out += "instrument(%) step(%) phase(%) | MAE phase step overall (min)\n";
  out += pct(accuracy[0]) + " " + pct(accuracy[1]) + " " + pct(accuracy[2]) + " | " + minutes(mae_minutes[0]) + " " +
         minutes(mae_minutes[1]) + " " + minutes(mae_minutes[2]) + "\n";
  return out;
}

}  // namespace surgant
