#include "epow/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

#include "epow/digest.hpp"

namespace epow::store {

namespace {

constexpr char kRecMagic[8] = {'E', 'P', 'O', 'W', 'R', 'E', 'C', '1'};
constexpr char kBodyMagic[8] = {'E', 'P', 'O', 'W', 'B', 'D', 'Y', '1'};
constexpr char kCkptMagic[8] = {'E', 'P', 'O', 'W', 'C', 'K', 'P', '1'};

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v >> 8));
  out.push_back(char(v));
}
void put_u32(std::string& out, uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(char(v >> (8 * i)));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(char(v >> (8 * i)));
}
void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}
void put_text(std::string& out, std::string_view s) {
  put_u16(out, static_cast<uint16_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  bool u16(uint16_t& v) {
    if (pos_ + 2 > data_.size()) return false;
    v = (uint16_t(uint8_t(data_[pos_])) << 8) | uint8_t(data_[pos_ + 1]);
    pos_ += 2;
    return true;
  }
  bool u32(uint32_t& v) {
    if (pos_ + 4 > data_.size()) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | uint8_t(data_[pos_ + i]);
    pos_ += 4;
    return true;
  }
  bool u64(uint64_t& v) {
    if (pos_ + 8 > data_.size()) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | uint8_t(data_[pos_ + i]);
    pos_ += 8;
    return true;
  }
  bool f64(double& v) {
    uint64_t bits;
    if (!u64(bits)) return false;
    std::memcpy(&v, &bits, 8);
    return true;
  }
  bool text(std::string& s) {
    uint16_t len;
    if (!u16(len)) return false;
    if (pos_ + len > data_.size()) return false;
    s.assign(data_.substr(pos_, len));
    pos_ += len;
    return true;
  }
  bool raw(std::string& s, size_t len) {
    if (pos_ + len > data_.size()) return false;
    s.assign(data_.substr(pos_, len));
    pos_ += len;
    return true;
  }
  bool done() const { return pos_ == data_.size(); }
  size_t pos() const { return pos_; }

 private:
  std::string_view data_;
  size_t pos_ = 0;
};

std::string hex_to_raw(const std::string& hex) {
  std::string out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i + 1 < hex.size(); i += 2) {
    auto val = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      return 0;
    };
    out.push_back(char(val(hex[i]) * 16 + val(hex[i + 1])));
  }
  return out;
}

std::string encode_record_payload(const PageRecord& r) {
  std::string p;
  put_text(p, r.url.render());
  put_f64(p, r.fetched_at);
  put_u16(p, static_cast<uint16_t>(r.status));
  std::string fp = hex_to_raw(r.fingerprint);
  fp.resize(32, '\0');
  p.append(fp);
  put_u64(p, r.body_offset);
  put_u64(p, r.body_length);
  put_f64(p, r.relevance);
  put_u32(p, r.depth);
  return p;
}

bool decode_record_payload(std::string_view payload, PageRecord& r) {
  Reader rd(payload);
  std::string url_text, fp;
  uint16_t status;
  if (!rd.text(url_text)) return false;
  if (!rd.f64(r.fetched_at)) return false;
  if (!rd.u16(status)) return false;
  if (!rd.raw(fp, 32)) return false;
  if (!rd.u64(r.body_offset)) return false;
  if (!rd.u64(r.body_length)) return false;
  if (!rd.f64(r.relevance)) return false;
  if (!rd.u32(r.depth)) return false;
  if (!rd.done()) return false;
  auto url = urlkit::parse_url(url_text);
  if (!url) return false;
  r.url = *url;
  r.status = status;
  r.fingerprint = to_hex(reinterpret_cast<const uint8_t*>(fp.data()), 32);
  return true;
}

void write_all_fd(int fd, std::string_view data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) throw IoFailure("write failed");
    off += static_cast<size_t>(n);
  }
}

std::string read_whole_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

void fsync_path(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

PageRepo::PageRepo(const std::filesystem::path& dir) : dir_(dir) {
  std::filesystem::create_directories(dir_);
  auto rec_path = dir_ / "pages.rec";
  auto body_path = dir_ / "pages.body";

  // fresh files get their magic header
  if (!std::filesystem::exists(rec_path)) {
    std::ofstream f(rec_path, std::ios::binary);
    f.write(kRecMagic, 8);
  }
  if (!std::filesystem::exists(body_path)) {
    std::ofstream f(body_path, std::ios::binary);
    f.write(kBodyMagic, 8);
  }

  // rebuild the URL index by scanning the record log; stop at the first
  // invalid record (torn tail from a crash) and truncate it away
  std::string data = read_whole_file(rec_path);
  size_t valid_end = 8;
  if (data.size() < 8 || std::memcmp(data.data(), kRecMagic, 8) != 0)
    throw IoFailure("bad record log header: " + rec_path.string());
  Reader rd(std::string_view(data).substr(8));
  for (;;) {
    size_t record_start = rd.pos();
    uint32_t crc, len;
    if (!rd.u32(crc) || !rd.u32(len)) break;
    std::string payload;
    if (!rd.raw(payload, len)) break;
    if (crc32(payload) != crc) break;
    PageRecord r;
    if (!decode_record_payload(payload, r)) break;
    by_url_[r.url.render()].push_back(std::move(r));
    ++record_count_;
    valid_end = 8 + record_start + 8 + len;
  }
  if (valid_end < data.size())
    std::filesystem::resize_file(rec_path, valid_end);

  body_end_ = std::filesystem::file_size(body_path);

  rec_out_.open(rec_path, std::ios::binary | std::ios::app);
  body_out_.open(body_path, std::ios::binary | std::ios::app);
  body_in_.open(body_path, std::ios::binary);
  if (!rec_out_ || !body_out_ || !body_in_)
    throw IoFailure("cannot open page store in " + dir_.string());
}

void PageRepo::put_page(PageRecord record, std::string_view body) {
  std::lock_guard lock(mu_);
  if (record.fingerprint != sha256_hex(body))
    throw std::invalid_argument("record fingerprint does not match body");

  record.body_offset = body_end_;
  record.body_length = body.size();
  body_out_.write(body.data(), static_cast<std::streamsize>(body.size()));
  body_out_.flush();
  if (!body_out_) throw IoFailure("body log write failed");
  body_end_ += body.size();

  std::string payload = encode_record_payload(record);
  std::string framed;
  put_u32(framed, crc32(payload));
  put_u32(framed, static_cast<uint32_t>(payload.size()));
  framed += payload;
  rec_out_.write(framed.data(), static_cast<std::streamsize>(framed.size()));
  rec_out_.flush();
  if (!rec_out_) throw IoFailure("record log write failed");

  by_url_[record.url.render()].push_back(std::move(record));
  ++record_count_;
}

std::optional<std::pair<PageRecord, std::string>> PageRepo::get_page(
    const urlkit::CanonicalUrl& url) const {
  std::lock_guard lock(mu_);
  auto it = by_url_.find(url.render());
  if (it == by_url_.end()) return std::nullopt;
  const PageRecord& r = it->second.back();
  std::string body(r.body_length, '\0');
  body_in_.clear();
  body_in_.seekg(static_cast<std::streamoff>(r.body_offset));
  body_in_.read(body.data(), static_cast<std::streamsize>(r.body_length));
  if (body_in_.gcount() != static_cast<std::streamsize>(r.body_length))
    throw IoFailure("body log read failed for " + url.render());
  return std::make_pair(r, std::move(body));
}

std::vector<PageRecord> PageRepo::history(const urlkit::CanonicalUrl& url) const {
  std::lock_guard lock(mu_);
  auto it = by_url_.find(url.render());
  if (it == by_url_.end()) return {};
  return it->second;
}

size_t PageRepo::unique_urls() const {
  std::lock_guard lock(mu_);
  return by_url_.size();
}

size_t PageRepo::record_count() const {
  std::lock_guard lock(mu_);
  return record_count_;
}

std::vector<std::string> PageRepo::urls() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.reserve(by_url_.size());
  for (const auto& [key, recs] : by_url_) out.push_back(key);
  std::sort(out.begin(), out.end());
  return out;
}

void PageRepo::sync_to_disk() {
  std::lock_guard lock(mu_);
  body_out_.flush();
  rec_out_.flush();
  fsync_path(dir_ / "pages.body");
  fsync_path(dir_ / "pages.rec");
}

const char* to_string(CheckpointError e) {
  switch (e) {
    case CheckpointError::NotFound: return "no checkpoint found";
    case CheckpointError::CorruptCheckpoint: return "corrupt checkpoint";
    case CheckpointError::IoFailure: return "checkpoint I/O failure";
  }
  return "unknown";
}

std::filesystem::path write_checkpoint(const std::filesystem::path& dir,
                                       const CheckpointState& state) {
  std::string blob(kCkptMagic, 8);
  put_u32(blob, state.version);
  put_f64(blob, state.created_at);
  put_u64(blob, state.crawl_seq);
  std::string digest = hex_to_raw(state.config_digest_hex);
  digest.resize(32, '\0');
  blob += digest;

  put_u32(blob, static_cast<uint32_t>(state.frontier_text.size()));
  blob += state.frontier_text;
  put_u32(blob, static_cast<uint32_t>(state.seen_urls.size()));
  for (const auto& u : state.seen_urls) put_text(blob, u);
  put_u32(blob, static_cast<uint32_t>(state.host_last_contact.size()));
  for (const auto& [host, last] : state.host_last_contact) {
    put_text(blob, host);
    put_f64(blob, last);
  }
  put_u32(blob, static_cast<uint32_t>(state.recrawl_urls.size()));
  for (const auto& u : state.recrawl_urls) put_text(blob, u);

  Sha256Digest whole = sha256(blob);
  blob.append(reinterpret_cast<const char*>(whole.data()), whole.size());

  std::filesystem::create_directories(dir);
  auto final_path = dir / ("checkpoint." + std::to_string(state.version) + ".ckpt");
  auto tmp_path = dir / ("checkpoint." + std::to_string(state.version) + ".tmp");

  int fd = ::open(tmp_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoFailure("cannot create " + tmp_path.string());
  try {
    write_all_fd(fd, blob);
    if (::fsync(fd) != 0) throw IoFailure("fsync failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::filesystem::rename(tmp_path, final_path);
  fsync_path(dir);

  // keep the new checkpoint and its predecessor, prune everything older
  std::vector<std::pair<uint32_t, std::filesystem::path>> existing;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto name = entry.path().filename().string();
    if (name.rfind("checkpoint.", 0) == 0 && name.size() > 16 &&
        name.substr(name.size() - 5) == ".ckpt") {
      uint32_t v = static_cast<uint32_t>(
          std::strtoul(name.c_str() + 11, nullptr, 10));
      existing.emplace_back(v, entry.path());
    }
  }
  std::sort(existing.begin(), existing.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 2; i < existing.size(); ++i)
    std::filesystem::remove(existing[i].second);

  return final_path;
}

Expected<CheckpointState, CheckpointError> load_checkpoint_file(
    const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return CheckpointError::NotFound;
  std::string data;
  try {
    data = read_whole_file(path);
  } catch (const IoFailure&) {
    return CheckpointError::IoFailure;
  }
  if (data.size() < 8 + 32 || std::memcmp(data.data(), kCkptMagic, 8) != 0)
    return CheckpointError::CorruptCheckpoint;

  std::string_view content(data.data(), data.size() - 32);
  Sha256Digest expect = sha256(content);
  if (std::memcmp(expect.data(), data.data() + data.size() - 32, 32) != 0)
    return CheckpointError::CorruptCheckpoint;

  CheckpointState st;
  Reader rd(content.substr(8));
  uint32_t frontier_len, seen_count, host_count, recrawl_count;
  std::string digest_raw;
  if (!rd.u32(st.version) || !rd.f64(st.created_at) || !rd.u64(st.crawl_seq) ||
      !rd.raw(digest_raw, 32) || !rd.u32(frontier_len))
    return CheckpointError::CorruptCheckpoint;
  st.config_digest_hex =
      to_hex(reinterpret_cast<const uint8_t*>(digest_raw.data()), 32);
  if (!rd.raw(st.frontier_text, frontier_len) || !rd.u32(seen_count))
    return CheckpointError::CorruptCheckpoint;
  for (uint32_t i = 0; i < seen_count; ++i) {
    std::string u;
    if (!rd.text(u)) return CheckpointError::CorruptCheckpoint;
    st.seen_urls.push_back(std::move(u));
  }
  if (!rd.u32(host_count)) return CheckpointError::CorruptCheckpoint;
  for (uint32_t i = 0; i < host_count; ++i) {
    std::string host;
    double last;
    if (!rd.text(host) || !rd.f64(last))
      return CheckpointError::CorruptCheckpoint;
    st.host_last_contact.emplace_back(std::move(host), last);
  }
  if (!rd.u32(recrawl_count)) return CheckpointError::CorruptCheckpoint;
  for (uint32_t i = 0; i < recrawl_count; ++i) {
    std::string u;
    if (!rd.text(u)) return CheckpointError::CorruptCheckpoint;
    st.recrawl_urls.push_back(std::move(u));
  }
  if (!rd.done()) return CheckpointError::CorruptCheckpoint;
  return st;
}

Expected<CheckpointState, CheckpointError> load_latest_checkpoint(
    const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) return CheckpointError::NotFound;
  std::vector<std::pair<uint32_t, std::filesystem::path>> candidates;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto name = entry.path().filename().string();
    if (name.rfind("checkpoint.", 0) == 0 &&
        name.size() > std::string("checkpoint..ckpt").size() &&
        name.substr(name.size() - 5) == ".ckpt") {
      uint32_t v = static_cast<uint32_t>(
          std::strtoul(name.c_str() + 11, nullptr, 10));
      candidates.emplace_back(v, entry.path());
    }
  }
  if (candidates.empty()) return CheckpointError::NotFound;
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [version, path] : candidates) {
    auto st = load_checkpoint_file(path);
    if (st.ok()) return st.value();
  }
  return CheckpointError::CorruptCheckpoint;
}

Expected<RecoveredState, CheckpointError> recover(const CheckpointState& ckpt) {
  RecoveredState out;
  out.crawl_seq = ckpt.crawl_seq;
  auto snap = frontier::FrontierSnapshot::parse(ckpt.frontier_text);
  if (!snap.ok()) return CheckpointError::CorruptCheckpoint;
  out.frontier = snap.value();
  out.seen_urls = ckpt.seen_urls;
  out.host_last_contact = ckpt.host_last_contact;
  for (const auto& text : ckpt.recrawl_urls) {
    auto url = urlkit::parse_url(text);
    if (!url) return CheckpointError::CorruptCheckpoint;
    out.recrawl.push_back(*url);
  }
  return out;
}

}  // namespace epow::store
