#pragma once

#include <set>
#include <string>
#include <vector>

#include "spellgcn/error.hpp"

namespace spellgcn {

// (source, target, prediction) with aligned lengths.
struct Triple {
  std::u32string source;
  std::u32string target;
  std::u32string prediction;
};

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct CharCounts {
  std::size_t flagged = 0;    // |S|: positions the system edited
  std::size_t gold = 0;       // |G|: positions with a real error
  std::size_t det_hits = 0;   // |S ∩ G|
  std::size_t corr_hits = 0;  // edited, wrong, and fixed to the target
};

struct SentCounts {
  std::size_t total = 0;
  std::size_t flagged = 0;
  std::size_t with_error = 0;
  std::size_t det_hits = 0;  // flagged set == gold set, both non-empty
  std::size_t corr_hits = 0;
  std::size_t clean = 0;
  std::size_t clean_flagged = 0;
};

struct CharMetrics {
  Prf detection;
  Prf correction;
  CharCounts counts;
};

struct SentMetrics {
  Prf detection;
  Prf correction;
  double fpr = 0;  // flagged clean sentences / clean sentences
  SentCounts counts;
};

struct EvalReport {
  CharMetrics chars;
  SentMetrics sentences;
};

namespace detail {

inline double rate(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline Prf prf(std::size_t hits, std::size_t flagged, std::size_t gold) {
  Prf r;
  r.precision = rate(hits, flagged);
  r.recall = rate(hits, gold);
  r.f1 = (r.precision + r.recall) > 0
             ? 2 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

inline void check_aligned(const Triple& t) {
  if (t.source.size() != t.target.size() || t.source.size() != t.prediction.size()) {
    throw DataError("metrics: source/target/prediction lengths differ");
  }
}

}  // namespace detail

inline CharMetrics char_metrics(const std::vector<Triple>& triples) {
  CharMetrics m;
  for (const Triple& t : triples) {
    detail::check_aligned(t);
    for (std::size_t i = 0; i < t.source.size(); ++i) {
      const bool gold = t.target[i] != t.source[i];
      const bool flagged = t.prediction[i] != t.source[i];
      m.counts.gold += gold;
      m.counts.flagged += flagged;
      if (flagged && gold) {
        ++m.counts.det_hits;
        if (t.prediction[i] == t.target[i]) ++m.counts.corr_hits;
      }
    }
  }
  m.detection = detail::prf(m.counts.det_hits, m.counts.flagged, m.counts.gold);
  m.correction = detail::prf(m.counts.corr_hits, m.counts.flagged, m.counts.gold);
  return m;
}

// Sentence detection is strict: the set of edited positions must equal the
// set of gold error positions. Correction requires the full target.
inline SentMetrics sentence_metrics(const std::vector<Triple>& triples) {
  SentMetrics m;
  for (const Triple& t : triples) {
    detail::check_aligned(t);
    bool has_error = false;
    bool flagged = false;
    bool sets_equal = true;
    for (std::size_t i = 0; i < t.source.size(); ++i) {
      const bool g = t.target[i] != t.source[i];
      const bool s = t.prediction[i] != t.source[i];
      has_error = has_error || g;
      flagged = flagged || s;
      sets_equal = sets_equal && (g == s);
    }
    ++m.counts.total;
    m.counts.with_error += has_error;
    m.counts.flagged += flagged;
    m.counts.clean += !has_error;
    m.counts.clean_flagged += (!has_error && flagged);
    if (flagged && has_error && sets_equal) ++m.counts.det_hits;
    if (has_error && t.prediction == t.target) ++m.counts.corr_hits;
  }
  m.detection = detail::prf(m.counts.det_hits, m.counts.flagged, m.counts.with_error);
  m.correction = detail::prf(m.counts.corr_hits, m.counts.flagged, m.counts.with_error);
  m.fpr = detail::rate(m.counts.clean_flagged, m.counts.clean);
  return m;
}

inline EvalReport evaluate_triples(const std::vector<Triple>& triples) {
  return {char_metrics(triples), sentence_metrics(triples)};
}

// Brute-force recomputation sharing no logic with the pipeline above:
// explicit position sets, separate rate arithmetic. Used as ground truth.
inline EvalReport oracle_metrics(const std::vector<Triple>& triples) {
  std::size_t c_flagged = 0, c_gold = 0, c_det = 0, c_corr = 0;
  std::size_t s_total = 0, s_flagged = 0, s_err = 0, s_det = 0, s_corr = 0, s_clean = 0,
              s_clean_flagged = 0;

  for (const Triple& t : triples) {
    if (t.source.size() != t.target.size() || t.source.size() != t.prediction.size()) {
      throw DataError("metrics: source/target/prediction lengths differ");
    }
    std::set<std::size_t> gold_set;
    std::set<std::size_t> flag_set;
    for (std::size_t i = 0; i < t.source.size(); ++i) {
      if (t.target[i] != t.source[i]) gold_set.insert(i);
      if (t.prediction[i] != t.source[i]) flag_set.insert(i);
    }
    c_gold += gold_set.size();
    c_flagged += flag_set.size();
    for (std::size_t i : flag_set) {
      if (gold_set.count(i)) {
        c_det += 1;
        if (t.prediction[i] == t.target[i]) c_corr += 1;
      }
    }

    s_total += 1;
    const bool has_error = !gold_set.empty();
    const bool flagged = !flag_set.empty();
    if (has_error) s_err += 1;
    if (flagged) s_flagged += 1;
    if (!has_error) {
      s_clean += 1;
      if (flagged) s_clean_flagged += 1;
    }
    if (flagged && has_error && gold_set == flag_set) s_det += 1;
    if (has_error && t.prediction == t.target) s_corr += 1;
  }

  auto div = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : double(a) / double(b);
  };
  auto f1 = [](double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; };

  EvalReport rep;
  rep.chars.counts = {c_flagged, c_gold, c_det, c_corr};
  rep.chars.detection.precision = div(c_det, c_flagged);
  rep.chars.detection.recall = div(c_det, c_gold);
  rep.chars.detection.f1 = f1(rep.chars.detection.precision, rep.chars.detection.recall);
  rep.chars.correction.precision = div(c_corr, c_flagged);
  rep.chars.correction.recall = div(c_corr, c_gold);
  rep.chars.correction.f1 = f1(rep.chars.correction.precision, rep.chars.correction.recall);

  rep.sentences.counts = {s_total, s_flagged, s_err, s_det, s_corr, s_clean, s_clean_flagged};
  rep.sentences.detection.precision = div(s_det, s_flagged);
  rep.sentences.detection.recall = div(s_det, s_err);
  rep.sentences.detection.f1 =
      f1(rep.sentences.detection.precision, rep.sentences.detection.recall);
  rep.sentences.correction.precision = div(s_corr, s_flagged);
  rep.sentences.correction.recall = div(s_corr, s_err);
  rep.sentences.correction.f1 =
      f1(rep.sentences.correction.precision, rep.sentences.correction.recall);
  rep.sentences.fpr = div(s_clean_flagged, s_clean);
  return rep;
}

inline bool counts_equal(const EvalReport& a, const EvalReport& b) {
  const CharCounts& x = a.chars.counts;
  const CharCounts& y = b.chars.counts;
  const SentCounts& u = a.sentences.counts;
  const SentCounts& v = b.sentences.counts;
  return x.flagged == y.flagged && x.gold == y.gold && x.det_hits == y.det_hits &&
         x.corr_hits == y.corr_hits && u.total == v.total && u.flagged == v.flagged &&
         u.with_error == v.with_error && u.det_hits == v.det_hits &&
         u.corr_hits == v.corr_hits && u.clean == v.clean &&
         u.clean_flagged == v.clean_flagged;
}

}  // namespace spellgcn
