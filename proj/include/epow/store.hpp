#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "epow/expected.hpp"
#include "epow/frontier.hpp"
#include "epow/urlkit.hpp"

namespace epow::store {

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PageRecord {
  urlkit::CanonicalUrl url;
  double fetched_at = 0.0;
  int status = 0;           // 0 when no HTTP status was obtained
  std::string fingerprint;  // 64 lowercase hex chars
  uint64_t body_offset = 0;
  uint64_t body_length = 0;
  double relevance = 0.0;
  uint32_t depth = 0;
};

/// Append-only page repository: `pages.rec` (checksummed records) plus
/// `pages.body` (raw body bytes addressed by offset+length). The URL index
/// is rebuilt by scanning the record log on open; latest fetch wins, prior
/// versions stay readable as history. Byte layout is pinned in FORMAT.md.
class PageRepo {
 public:
  explicit PageRepo(const std::filesystem::path& dir);

  /// record.fingerprint must be the digest of `body`.
  void put_page(PageRecord record, std::string_view body);

  std::optional<std::pair<PageRecord, std::string>> get_page(
      const urlkit::CanonicalUrl& url) const;

  std::vector<PageRecord> history(const urlkit::CanonicalUrl& url) const;

  size_t unique_urls() const;
  size_t record_count() const;
  std::vector<std::string> urls() const;  // sorted canonical keys
  bool empty() const { return record_count() == 0; }

  /// Flush stream buffers and fsync both logs.
  void sync_to_disk();

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void append_record(const PageRecord& r);

  mutable std::mutex mu_;
  std::filesystem::path dir_;
  std::ofstream rec_out_;
  std::ofstream body_out_;
  mutable std::ifstream body_in_;
  std::unordered_map<std::string, std::vector<PageRecord>> by_url_;
  uint64_t body_end_ = 0;
  size_t record_count_ = 0;
};

struct CheckpointState {
  uint32_t version = 0;  // checkpoint sequence number
  double created_at = 0.0;
  uint64_t crawl_seq = 0;  // pages fetched so far
  std::string config_digest_hex;
  std::string frontier_text;  // frontier::FrontierSnapshot serialization
  std::vector<std::string> seen_urls;
  std::vector<std::pair<std::string, double>> host_last_contact;
  std::vector<std::string> recrawl_urls;  // dispatched but unconfirmed
};

enum class CheckpointError {
  NotFound,
  CorruptCheckpoint,
  IoFailure,
};

const char* to_string(CheckpointError e);

/// Atomic publish: temp file, fsync, rename. The previous checkpoint file is
/// kept; older ones are pruned. Returns the published path.
std::filesystem::path write_checkpoint(const std::filesystem::path& dir,
                                       const CheckpointState& state);

Expected<CheckpointState, CheckpointError> load_checkpoint_file(
    const std::filesystem::path& path);

/// Newest checkpoint in `dir` whose trailing integrity digest verifies;
/// corrupt files fall back to the next older one.
Expected<CheckpointState, CheckpointError> load_latest_checkpoint(
    const std::filesystem::path& dir);

struct RecoveredState {
  uint64_t crawl_seq = 0;
  frontier::FrontierSnapshot frontier;
  std::vector<std::string> seen_urls;
  std::vector<std::pair<std::string, double>> host_last_contact;
  std::vector<urlkit::CanonicalUrl> recrawl;  // to re-fetch after the crash
};

/// Unpack a checkpoint into live structures. The recrawl list is bounded by
/// the number of pages dispatched since the previous checkpoint.
Expected<RecoveredState, CheckpointError> recover(const CheckpointState& ckpt);

}  // namespace epow::store
