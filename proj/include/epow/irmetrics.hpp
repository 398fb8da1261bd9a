#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace epow::irmetrics {

using DocId = std::string;
using DocSet = std::set<DocId>;

enum class MetricsErrorKind {
  NotInCorpus,
  EmptyRetrieval,
  NoRelevantItems,
  DuplicateInRanking,
  BadShape,
};

struct MetricsError : std::runtime_error {
  MetricsError(MetricsErrorKind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
  MetricsErrorKind kind;
};

/// The four disjoint segments a search splits the corpus into.
struct SegmentPartition {
  DocSet relevant_retrieved;
  DocSet nonrelevant_retrieved;
  DocSet relevant_not_retrieved;
  DocSet nonrelevant_not_retrieved;

  size_t total() const {
    return relevant_retrieved.size() + nonrelevant_retrieved.size() +
           relevant_not_retrieved.size() + nonrelevant_not_retrieved.size();
  }
};

SegmentPartition partition(const DocSet& retrieved, const DocSet& relevant,
                           const DocSet& corpus);

/// |relevant retrieved| / |retrieved|. Undefined (throws EmptyRetrieval)
/// when nothing was retrieved — never silently 0 or 1.
double precision(const SegmentPartition& p);

/// |relevant retrieved| / |relevant|. Throws NoRelevantItems when the
/// relevant set is empty.
double recall(const SegmentPartition& p);

struct PrPoint {
  size_t rank = 0;  // k, 1-based
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;

  /// Rows "k,recall,precision" with a header line.
  std::string to_csv() const;
};

/// Precision/recall at every rank prefix of a duplicate-free ranking.
PrCurve pr_curve(const std::vector<DocId>& ranking, const DocSet& relevant);

/// The ideal searcher: all N relevant documents first, so precision holds
/// at 1.0 until rank N, then decays as min(k,N)/k; recall is min(k,N)/N.
PrCurve ideal_pr_curve(size_t n_relevant, size_t n_total);

/// Human-readable summary; phrases the non-relevant fraction of the
/// retrieved set as user-effort overhead.
std::string format_summary(const SegmentPartition& p);

}  // namespace epow::irmetrics
