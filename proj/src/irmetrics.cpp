#include "epow/irmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace epow::irmetrics {

SegmentPartition partition(const DocSet& retrieved, const DocSet& relevant,
                           const DocSet& corpus) {
  for (const auto& d : retrieved)
    if (!corpus.count(d))
      throw MetricsError(MetricsErrorKind::NotInCorpus,
                         "retrieved document not in corpus: " + d);
  for (const auto& d : relevant)
    if (!corpus.count(d))
      throw MetricsError(MetricsErrorKind::NotInCorpus,
                         "relevant document not in corpus: " + d);

  SegmentPartition p;
  for (const auto& d : corpus) {
    bool ret = retrieved.count(d) > 0;
    bool rel = relevant.count(d) > 0;
    if (ret && rel)
      p.relevant_retrieved.insert(d);
    else if (ret)
      p.nonrelevant_retrieved.insert(d);
    else if (rel)
      p.relevant_not_retrieved.insert(d);
    else
      p.nonrelevant_not_retrieved.insert(d);
  }
  return p;
}

double precision(const SegmentPartition& p) {
  size_t retrieved = p.relevant_retrieved.size() + p.nonrelevant_retrieved.size();
  if (retrieved == 0)
    throw MetricsError(MetricsErrorKind::EmptyRetrieval,
                       "precision undefined: nothing retrieved");
  return static_cast<double>(p.relevant_retrieved.size()) /
         static_cast<double>(retrieved);
}

double recall(const SegmentPartition& p) {
  size_t relevant = p.relevant_retrieved.size() + p.relevant_not_retrieved.size();
  if (relevant == 0)
    throw MetricsError(MetricsErrorKind::NoRelevantItems,
                       "recall undefined: no relevant items");
  return static_cast<double>(p.relevant_retrieved.size()) /
         static_cast<double>(relevant);
}

PrCurve pr_curve(const std::vector<DocId>& ranking, const DocSet& relevant) {
  if (relevant.empty())
    throw MetricsError(MetricsErrorKind::NoRelevantItems,
                       "recall undefined: no relevant items");
  DocSet seen;
  PrCurve curve;
  size_t hits = 0;
  for (size_t k = 0; k < ranking.size(); ++k) {
    if (!seen.insert(ranking[k]).second)
      throw MetricsError(MetricsErrorKind::DuplicateInRanking,
                         "duplicate in ranking: " + ranking[k]);
    if (relevant.count(ranking[k])) ++hits;
    PrPoint pt;
    pt.rank = k + 1;
    pt.precision = static_cast<double>(hits) / static_cast<double>(k + 1);
    pt.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    curve.points.push_back(pt);
  }
  return curve;
}

PrCurve ideal_pr_curve(size_t n_relevant, size_t n_total) {
  if (n_relevant == 0 || n_relevant > n_total)
    throw MetricsError(MetricsErrorKind::BadShape,
                       "need 0 < n_relevant <= n_total");
  PrCurve curve;
  for (size_t k = 1; k <= n_total; ++k) {
    size_t hits = std::min(k, n_relevant);
    PrPoint pt;
    pt.rank = k;
    pt.precision = static_cast<double>(hits) / static_cast<double>(k);
    pt.recall = static_cast<double>(hits) / static_cast<double>(n_relevant);
    curve.points.push_back(pt);
  }
  return curve;
}

std::string PrCurve::to_csv() const {
  std::ostringstream out;
  out << "k,recall,precision\n";
  for (const auto& pt : points) {
    char row[80];
    std::snprintf(row, sizeof row, "%zu,%.6f,%.6f\n", pt.rank, pt.recall,
                  pt.precision);
    out << row;
  }
  return out.str();
}

std::string format_summary(const SegmentPartition& p) {
  double prec = precision(p);
  double overhead = (1.0 - prec) * 100.0;
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "precision %.4f\n", prec);
  out << line;
  size_t relevant = p.relevant_retrieved.size() + p.relevant_not_retrieved.size();
  if (relevant > 0) {
    std::snprintf(line, sizeof line, "recall %.4f\n", recall(p));
    out << line;
  }
  std::snprintf(line, sizeof line,
                "%.0f%% of the user effort is overhead reviewing non-relevant "
                "items\n",
                overhead);
  out << line;
  return out.str();
}

}  // namespace epow::irmetrics
