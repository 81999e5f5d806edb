#include <cmath>

#include "doctest.h"
#include "metric_oracles.hpp"
#include "surgant/errors.hpp"
#include "surgant/metrics.hpp"

using namespace surgant;

namespace {

Tokens toks(const std::string& s) { return metric_tokens(s); }

}  // namespace

TEST_CASE("bleu: identity, disjoint and argument errors") {
  const std::vector<Tokens> c{toks("the next phase is sellar"), toks("prepare kerrisons and suction")};
  for (int n = 1; n <= 4; ++n) CHECK(std::abs(bleu(c, c, n) - 1.0) < 1e-15);
  const std::vector<Tokens> other{toks("x y z w v"), toks("p q r s")};
  CHECK(bleu(c, other, 1) < 1e-8);
  CHECK(bleu(c, other, 1) > 0.0);
  CHECK_THROWS_AS(bleu(c, std::vector<Tokens>{toks("a")}, 1), InputError);
  CHECK_THROWS_AS(bleu(c, c, 5), ConfigError);
  CHECK(bleu(std::vector<Tokens>{Tokens{}}, std::vector<Tokens>{toks("a")}, 1) == 0.0);
}

TEST_CASE("bleu: brevity penalty hand example") {
  // 3 candidate words against 6 reference words, all unigrams match.
  const std::vector<Tokens> c{toks("a b c")}, r{toks("a b c d e f")};
  CHECK(std::abs(bleu(c, r, 1) - std::exp(1.0 - 2.0)) < 1e-15);
}

TEST_CASE("rouge_l: examples") {
  CHECK(rouge_l(toks("a b c d"), toks("a b c d")) == 1.0);
  CHECK(lcs_length(toks("a b c d"), toks("a c d")) == 3);
  CHECK(std::abs(rouge_l(toks("a b c d"), toks("a c d")) - 0.857142857142857) < 1e-12);
  CHECK(rouge_l(toks("a b"), toks("c d")) == 0.0);
  CHECK(rouge_l(Tokens{}, toks("c d")) == 0.0);
}

TEST_CASE("meteor: examples") {
  const auto five = toks("a b c d e");
  const auto a = meteor_align(five, five);
  CHECK(a.matches == 5);
  CHECK(a.chunks == 1);
  CHECK(std::abs(meteor(five, five) - 0.996) < 1e-12);
  CHECK(meteor(toks("a b"), toks("c d")) == 0.0);
  // "b a" against "a b": two matches, two chunks.
  const auto swapped = meteor_align(toks("b a"), toks("a b"));
  CHECK(swapped.matches == 2);
  CHECK(swapped.chunks == 2);
  // Repeated words: the aligner must pick the contiguous reading.
  const auto rep = meteor_align(toks("a b a b"), toks("x a b"));
  CHECK(rep.matches == 2);
  CHECK(rep.chunks == 1);
}

TEST_CASE("metrics: match brute-force oracles on 200 random corpora") {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto corpus = oracle::random_corpus(rng);
    for (int n = 1; n <= 4; ++n)
      worst = std::max(worst, std::abs(bleu(corpus.candidates, corpus.references, n) -
                                       oracle::bleu(corpus.candidates, corpus.references, n)));
    for (std::size_t i = 0; i < corpus.candidates.size(); ++i) {
      const auto& c = corpus.candidates[i];
      const auto& r = corpus.references[i];
      CHECK(lcs_length(c, r) == oracle::lcs(c, r));
      worst = std::max(worst, std::abs(rouge_l(c, r) - oracle::rouge_l(c, r)));
      const auto fast = meteor_align(c, r);
      const auto slow = oracle::align(c, r);
      CHECK(fast.matches == slow.matches);
      CHECK(fast.chunks == slow.chunks);
      worst = std::max(worst, std::abs(meteor(c, r) - oracle::meteor(c, r)));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("bleu: pooled precisions are not monotone on every corpus") {
  // An unmatched one-word sentence lowers the unigram precision but has no bigrams.
  const std::vector<Tokens> c{toks("x"), toks("a b")}, r{toks("y"), toks("a b")};
  CHECK(bleu(c, r, 2) > bleu(c, r, 1));
  // Clipping alone can do the same within one sentence: p1 = 2/3, p2 = 1/1.
  const std::vector<Tokens> c1{toks("step next step")}, r1{toks("next step next suction")};
  CHECK(bleu(c1, r1, 2) > bleu(c1, r1, 1));
}

TEST_CASE("category_accuracy: class extraction and set semantics") {
  CHECK(extract_classes("The next phase is closure", Category::kFuturePhase) == std::vector<std::string>{"closure"});
  CHECK(extract_classes("end of phase", Category::kFuturePhase) == std::vector<std::string>{"end of phase"});
  CHECK(extract_classes("The next step is tumour excision", Category::kFutureStep) ==
        std::vector<std::string>{"tumour excision"});
  CHECK(extract_classes("Prepare suction, kerrisons", Category::kFutureInstrument) ==
        std::vector<std::string>{"kerrisons", "suction"});
  CHECK(extract_classes("cup forceps and bipolar forceps", Category::kFutureInstrument) ==
        std::vector<std::string>{"bipolar forceps", "cup forceps"});

  const std::vector<std::string> preds{"Prepare suction, kerrisons", "Prepare suction", "Prepare drill"};
  const std::vector<std::string> gold{"kerrisons, suction", "kerrisons, suction", "surgical drill"};
  CHECK(std::abs(category_accuracy(preds, gold, Category::kFutureInstrument) - 1.0 / 3.0) < 1e-15);
  const std::vector<std::string> same{"sellar", "closure"};
  CHECK(category_accuracy(same, same, Category::kFuturePhase) == 1.0);
  CHECK(std::isnan(category_accuracy({}, {}, Category::kFuturePhase)));
  CHECK_THROWS_AS(extract_classes("x", Category::kTime), ConfigError);
}

TEST_CASE("time_mae: parsing and arithmetic") {
  CHECK(*parse_minutes("about 13 minutes") == 13.0);
  CHECK(*parse_minutes("2.5 minutes left") == 2.5);
  CHECK(*parse_minutes("in 7. then 8") == 7.0);
  CHECK_FALSE(parse_minutes("soon").has_value());

  const std::vector<std::string> p1{"about 13 minutes"};
  const std::vector<double> g1{13.0};
  CHECK(time_mae(p1, g1).mae == 0.0);
  const std::vector<std::string> p2{"10 minutes", "20 minutes", "soon"};
  const std::vector<double> g2{13.0, 14.0, 3.0};
  const auto m = time_mae(p2, g2);
  CHECK(m.mae == 4.5);
  CHECK(m.scored == 2);
  CHECK(m.unparseable == 1);
  CHECK(m.scored + m.unparseable == p2.size());
  const std::vector<std::string> none{"soon"};
  CHECK_THROWS_AS(time_mae(none, std::vector<double>{1.0}), UndefinedMetricError);
}

TEST_CASE("evaluate: report layout and identity scores") {
  std::vector<QAItem> gold;
  auto add = [&](Category c, TimeScope s, std::string answer, std::string label, double minutes = 0.0) {
    QAItem q;
    q.video = "01";
    q.category = c;
    q.scope = s;
    q.answer = std::move(answer);
    q.label = std::move(label);
    q.minutes = minutes;
    gold.push_back(q);
  };
  add(Category::kFuturePhase, TimeScope::kNone, "The next phase is sellar", "sellar");
  add(Category::kFutureStep, TimeScope::kNone, "The next step is durotomy", "durotomy");
  add(Category::kFutureInstrument, TimeScope::kNone, "Prepare ring curette, suction", "ring curette, suction");
  add(Category::kTime, TimeScope::kPhase, "13 minutes left in this phase", "13 minutes", 13.2);
  add(Category::kTime, TimeScope::kStep, "2 minutes left in this step", "2 minutes", 1.6);
  add(Category::kTime, TimeScope::kOverall, "23 minutes left in the surgery", "23 minutes", 23.13);
  std::vector<std::string> preds;
  for (const auto& g : gold) preds.push_back(g.answer);

  const auto report = evaluate(preds, gold);
  for (double b : report.overall.bleu) CHECK(std::abs(b - 1.0) < 1e-12);
  CHECK(report.overall.rouge_l == 1.0);
  CHECK(report.overall.meteor >= 0.99);
  CHECK(report.accuracy.size() == 3);
  CHECK(report.mae_minutes.size() == 3);
  for (const auto& a : report.accuracy) CHECK(*a == 1.0);
  CHECK(std::abs(*report.mae_minutes[0] - 0.2) < 1e-12);
  CHECK(std::abs(*report.mae_minutes[1] - 0.4) < 1e-12);
  CHECK(std::abs(*report.mae_minutes[2] - 0.13) < 1e-12);
  CHECK(report.mae_scored[2] + report.mae_unparseable[2] == 1);

  preds[5] = "soon";
  const auto partial = evaluate(preds, gold);
  CHECK_FALSE(partial.mae_minutes[2].has_value());
  CHECK(partial.mae_unparseable[2] == 1);
  const std::string json = partial.to_json();
  CHECK(json.find("\"future-instrument\"") != std::string::npos);
  CHECK(json.find("\"mae_minutes\": null") != std::string::npos);
  CHECK(partial.to_table().find("100.00") != std::string::npos);
}
