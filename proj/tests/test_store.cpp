#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>

#include "epow/digest.hpp"
#include "epow/store.hpp"

using namespace epow::store;
using epow::urlkit::parse_url;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("epow-store-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

PageRecord make_record(const std::string& url_text, const std::string& body,
                       double fetched_at = 100.0) {
  PageRecord r;
  r.url = *parse_url(url_text);
  r.fetched_at = fetched_at;
  r.status = 200;
  r.fingerprint = epow::sha256_hex(body);
  r.relevance = 0.5;
  r.depth = 1;
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("put then get round-trips record and body") {
  TempDir dir;
  PageRepo repo(dir.path);
  CHECK(repo.empty());

  std::string body = "<html>hello</html>";
  repo.put_page(make_record("http://h/a", body), body);
  auto got = repo.get_page(*parse_url("http://h/a"));
  REQUIRE(got.has_value());
  CHECK(got->first.url.render() == "http://h/a");
  CHECK(got->first.status == 200);
  CHECK(got->second == body);
  CHECK(got->first.fingerprint == epow::sha256_hex(body));

  CHECK_FALSE(repo.get_page(*parse_url("http://h/missing")).has_value());
}

TEST_CASE("fingerprint must match the body") {
  TempDir dir;
  PageRepo repo(dir.path);
  auto r = make_record("http://h/a", "real body");
  CHECK_THROWS_AS(repo.put_page(r, "different body"), std::invalid_argument);
}

TEST_CASE("latest fetch wins, history keeps both") {
  TempDir dir;
  PageRepo repo(dir.path);
  repo.put_page(make_record("http://h/a", "v1", 10.0), "v1");
  repo.put_page(make_record("http://h/a", "v2", 20.0), "v2");

  auto got = repo.get_page(*parse_url("http://h/a"));
  REQUIRE(got.has_value());
  CHECK(got->second == "v2");
  CHECK(repo.history(*parse_url("http://h/a")).size() == 2);
  CHECK(repo.unique_urls() == 1);
  CHECK(repo.record_count() == 2);
}

TEST_CASE("randomized round-trip with per-record digest verification") {
  TempDir dir;
  std::mt19937 rng(4);
  std::vector<std::pair<std::string, std::string>> pages;
  {
    PageRepo repo(dir.path);
    for (int i = 0; i < 10000; ++i) {
      std::string url = "http://h" + std::to_string(rng() % 50) + ".sim/p" +
                        std::to_string(i);
      std::string body(rng() % 200, '\0');
      for (auto& c : body) c = static_cast<char>(rng());
      repo.put_page(make_record(url, body), body);
      pages.emplace_back(url, std::move(body));
    }
  }
  // reopen: the index is rebuilt by scanning the log
  PageRepo repo(dir.path);
  CHECK(repo.record_count() == 10000);
  for (const auto& [url, body] : pages) {
    auto got = repo.get_page(*parse_url(url));
    REQUIRE(got.has_value());
    CHECK(got->first.fingerprint == epow::sha256_hex(got->second));
    if (got->second != body) {
      // an older version of the same URL may have been superseded
      bool found = false;
      for (const auto& rec : repo.history(*parse_url(url)))
        if (rec.fingerprint == epow::sha256_hex(body)) found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("append-only: published bytes are never rewritten") {
  TempDir dir;
  PageRepo repo(dir.path);
  repo.put_page(make_record("http://h/a", "first"), "first");
  repo.sync_to_disk();
  std::string before = read_file(dir.path / "pages.rec");
  repo.put_page(make_record("http://h/b", "second"), "second");
  repo.sync_to_disk();
  std::string after = read_file(dir.path / "pages.rec");
  REQUIRE(after.size() > before.size());
  CHECK(after.compare(0, before.size(), before) == 0);
}

TEST_CASE("torn tail from a crash is dropped on reopen") {
  TempDir dir;
  {
    PageRepo repo(dir.path);
    repo.put_page(make_record("http://h/a", "aaa"), "aaa");
    repo.put_page(make_record("http://h/b", "bbb"), "bbb");
  }
  auto rec = dir.path / "pages.rec";
  fs::resize_file(rec, fs::file_size(rec) - 7);
  PageRepo repo(dir.path);
  CHECK(repo.record_count() == 1);
  CHECK(repo.get_page(*parse_url("http://h/a")).has_value());
  CHECK_FALSE(repo.get_page(*parse_url("http://h/b")).has_value());
  // appends continue cleanly after truncation
  repo.put_page(make_record("http://h/c", "ccc"), "ccc");
  PageRepo again(dir.path);
  CHECK(again.record_count() == 2);
}

namespace {

CheckpointState sample_state() {
  CheckpointState st;
  st.version = 3;
  st.created_at = 1234.5;
  st.crawl_seq = 77;
  st.config_digest_hex = epow::sha256_hex("config text");
  st.frontier_text =
      "http://h/a 0.500000 1 10 CQ\nhttp://h/b 1.000000 0 2 PQ\n";
  st.seen_urls = {"http://h/a", "http://h/b", "http://h/c"};
  st.host_last_contact = {{"h", 1200.0}, {"i.sim", 1100.5}};
  st.recrawl_urls = {"http://h/b"};
  return st;
}

}  // namespace

TEST_CASE("checkpoint write/load round-trip is field-exact") {
  TempDir dir;
  auto st = sample_state();
  auto path = write_checkpoint(dir.path, st);
  CHECK(path.filename() == "checkpoint.3.ckpt");

  auto loaded = load_checkpoint_file(path);
  REQUIRE(loaded.ok());
  CHECK(loaded->version == st.version);
  CHECK(loaded->created_at == st.created_at);
  CHECK(loaded->crawl_seq == st.crawl_seq);
  CHECK(loaded->config_digest_hex == st.config_digest_hex);
  CHECK(loaded->frontier_text == st.frontier_text);
  CHECK(loaded->seen_urls == st.seen_urls);
  CHECK(loaded->host_last_contact == st.host_last_contact);
  CHECK(loaded->recrawl_urls == st.recrawl_urls);
}

TEST_CASE("truncation at every byte boundary is caught") {
  TempDir dir;
  auto st = sample_state();
  auto path = write_checkpoint(dir.path, st);
  std::string blob = read_file(path);
  REQUIRE(blob.size() > 40);

  auto damaged = dir.path / "damaged.ckpt";
  for (size_t len = 0; len < blob.size(); ++len) {
    {
      std::ofstream out(damaged, std::ios::binary | std::ios::trunc);
      out.write(blob.data(), static_cast<std::streamsize>(len));
    }
    auto loaded = load_checkpoint_file(damaged);
    CHECK_FALSE(loaded.ok());
  }
}

TEST_CASE("loader picks the newest valid checkpoint") {
  TempDir dir;
  auto st = sample_state();
  st.version = 1;
  st.crawl_seq = 10;
  write_checkpoint(dir.path, st);
  st.version = 2;
  st.crawl_seq = 20;
  write_checkpoint(dir.path, st);

  auto loaded = load_latest_checkpoint(dir.path);
  REQUIRE(loaded.ok());
  CHECK(loaded->version == 2);
  CHECK(loaded->crawl_seq == 20);

  SUBCASE("corrupt newest falls back to the previous one") {
    auto newest = dir.path / "checkpoint.2.ckpt";
    auto bytes = read_file(newest);
    bytes[bytes.size() / 2] ^= 0x5a;
    std::ofstream(newest, std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    auto fallback = load_latest_checkpoint(dir.path);
    REQUIRE(fallback.ok());
    CHECK(fallback->version == 1);
    CHECK(fallback->crawl_seq == 10);
  }
  SUBCASE("empty dir reports NotFound") {
    TempDir other;
    CHECK(load_latest_checkpoint(other.path).error() ==
          CheckpointError::NotFound);
  }
}

TEST_CASE("old checkpoints are pruned, latest two kept") {
  TempDir dir;
  auto st = sample_state();
  for (uint32_t v = 1; v <= 5; ++v) {
    st.version = v;
    write_checkpoint(dir.path, st);
  }
  CHECK_FALSE(fs::exists(dir.path / "checkpoint.3.ckpt"));
  CHECK(fs::exists(dir.path / "checkpoint.4.ckpt"));
  CHECK(fs::exists(dir.path / "checkpoint.5.ckpt"));
}

TEST_CASE("recover unpacks a checkpoint into live structures") {
  auto st = sample_state();
  auto recovered = recover(st);
  REQUIRE(recovered.ok());
  CHECK(recovered->crawl_seq == 77);
  CHECK(recovered->frontier.circular.size() == 1);
  CHECK(recovered->frontier.priority.size() == 1);
  CHECK(recovered->seen_urls.size() == 3);
  CHECK(recovered->host_last_contact.size() == 2);
  REQUIRE(recovered->recrawl.size() == 1);
  CHECK(recovered->recrawl[0].render() == "http://h/b");

  SUBCASE("recovery is idempotent") {
    auto again = recover(st);
    REQUIRE(again.ok());
    CHECK(again->crawl_seq == recovered->crawl_seq);
    CHECK(again->seen_urls == recovered->seen_urls);
    CHECK(again->frontier.serialize() == recovered->frontier.serialize());
  }
  SUBCASE("garbage frontier text is an error") {
    st.frontier_text = "not a frontier line\n";
    CHECK_FALSE(recover(st).ok());
  }
}
