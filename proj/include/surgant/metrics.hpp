#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surgant/dataset.hpp"

namespace surgant {

using Tokens = std::vector<std::string>;

// Same normalizer as the decoder tokenizer.
Tokens metric_tokens(const std::string& text);

inline constexpr double kBleuEpsilon = 1e-9;

// Corpus BLEU-n (n in 1..4): clipped n-gram precisions pooled over the corpus,
// a zero count replaced by kBleuEpsilon, uniform geometric mean, brevity
// penalty exp(1 - r/c) when c <= r (0 when c = 0).
double bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, int n);
std::array<double, 4> bleu_1_to_4(std::span<const Tokens> candidates, std::span<const Tokens> references);

std::size_t lcs_length(const Tokens& a, const Tokens& b);
// LCS F-score with beta = 1; 0 for an empty side.
double rouge_l(const Tokens& candidate, const Tokens& reference);
double rouge_l_corpus(std::span<const Tokens> candidates, std::span<const Tokens> references);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
// Exact unigram alignment with the most matches, then the fewest chunks.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference);
double meteor(const Tokens& candidate, const Tokens& reference);
double meteor_corpus(std::span<const Tokens> candidates, std::span<const Tokens> references);

// Class names (phase, step or instrument vocabulary) mentioned in `text`,
// longest match first, as a sorted set.
std::vector<std::string> extract_classes(const std::string& text, Category category);
// Fraction whose extracted class set equals the gold one; NaN when empty.
double category_accuracy(std::span<const std::string> predictions, std::span<const std::string> gold_labels,
                         Category category);

// First integer or decimal in the text.
std::optional<double> parse_minutes(const std::string& text);

struct TimeMae {
  double mae = 0.0;
  std::size_t scored = 0;
  std::size_t unparseable = 0;
};
// Throws UndefinedMetricError when nothing parses.
TimeMae time_mae(std::span<const std::string> predictions, std::span<const double> gold_minutes);

struct TextScores {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::size_t count = 0;
};
TextScores score_text(std::span<const std::string> predictions, std::span<const std::string> references);

struct MetricReport {
  TextScores overall;
  std::array<std::optional<TextScores>, 4> per_category;   // indexed by Category
  // future-instrument, future-step, future-phase
  std::array<std::optional<double>, 3> accuracy;
  std::array<std::size_t, 3> accuracy_count{};
  // phase, step, overall; absent when nothing parsed
  std::array<std::optional<double>, 3> mae_minutes;
  std::array<std::size_t, 3> mae_scored{};
  std::array<std::size_t, 3> mae_unparseable{};

  std::optional<double> accuracy_for(Category c) const;
  std::string to_json() const;
  // Scores x100 in the layout of the usual results tables.
  std::string to_table() const;
};

MetricReport evaluate(std::span<const std::string> predictions, std::span<const QAItem> gold);

}  // namespace surgant
