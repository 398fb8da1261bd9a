#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "epow/expected.hpp"

namespace epow::urlkit {

enum class UrlError {
  MalformedUrl,
  UnsupportedScheme,
};

const char* to_string(UrlError e);

/// Normalized absolute http/https URL. The rendered form is the identity
/// key for the seen-set, the frontier and the page store:
///   - scheme and host lowercase
///   - default ports (80/443) never stored
///   - path with dot-segments removed, never empty ("/" minimum)
///   - query pairs sorted by key then value, duplicates preserved
///   - fragment always stripped (it never reaches the server)
struct CanonicalUrl {
  std::string scheme;
  std::string host;
  std::optional<uint16_t> port;
  std::string path;
  std::vector<std::pair<std::string, std::string>> query;

  std::string render() const;
  uint16_t effective_port() const;
  /// Value for the HTTP Host header: host plus ":port" when non-default.
  std::string authority() const;

  bool operator==(const CanonicalUrl&) const = default;
};

using UrlResult = Expected<CanonicalUrl, UrlError>;

/// Parse an absolute URL and canonicalize it in one step.
UrlResult parse_url(std::string_view text);

/// RFC 3986 section 5 reference resolution against a canonical base,
/// followed by canonicalization. Empty reference yields the base itself.
UrlResult resolve(const CanonicalUrl& base, std::string_view reference);

/// Membership structure over canonical URLs; check-and-insert is atomic
/// so concurrent discoverers claim each URL exactly once.
class SeenSet {
 public:
  /// True iff this is the first sighting of the URL.
  bool check_insert(const CanonicalUrl& url);
  bool contains(const CanonicalUrl& url) const;
  size_t size() const;

  /// Rendered canonical keys, for checkpointing.
  std::vector<std::string> snapshot() const;
  void restore(const std::vector<std::string>& keys);

 private:
  mutable std::mutex mu_;
  std::unordered_set<std::string> keys_;
};

}  // namespace epow::urlkit
