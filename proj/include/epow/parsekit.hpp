#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "epow/urlkit.hpp"

namespace epow::parsekit {

struct PageAnalysis {
  std::vector<urlkit::CanonicalUrl> links;  // document order, deduplicated
  std::string fingerprint;                  // 64 lowercase hex chars
  double relevance = 0.0;                   // in [0,1]
  size_t token_count = 0;
};

/// Every syntactically recoverable anchor href, resolved against base (or a
/// preceding <base href>), canonicalized, deduplicated keeping the first
/// occurrence. Arbitrary garbage input yields a possibly-empty list, never
/// a failure; unsupported and malformed hrefs are skipped silently.
std::vector<urlkit::CanonicalUrl> extract_links(std::string_view body,
                                                const urlkit::CanonicalUrl& base);

/// Deterministic digest of the exact bytes, rendered as 64 hex chars.
/// Distinct URLs serving byte-identical bodies collapse to one fingerprint.
std::string fingerprint(std::string_view body);

/// Distinct-term hit ratio: |topic terms occurring as tokens| / |topic|.
/// Tags are stripped, text lowercased, tokens split on non-alphanumerics.
/// An empty topic means an untargeted crawl and scores 1.
double relevance_score(std::string_view body,
                       const std::vector<std::string>& topic);

size_t count_tokens(std::string_view body);

PageAnalysis analyze(std::string_view body, const urlkit::CanonicalUrl& base,
                     const std::vector<std::string>& topic);

}  // namespace epow::parsekit
