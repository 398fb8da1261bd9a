#include "epow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace epow::crawlctl {

namespace {

[[noreturn]] void fail(size_t line, const std::string& message) {
  throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok, size_t line, const char* key) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(line, std::string("key '") + key + "': bad number '" + tok + "'");
  }
}

uint64_t parse_count(const std::string& tok, size_t line, const char* key) {
  double v = parse_number(tok, line, key);
  if (v < 0 || v != std::floor(v))
    fail(line, std::string("key '") + key + "': expected a nonnegative integer");
  return static_cast<uint64_t>(v);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

}  // namespace

CrawlConfig parse_config(const std::string& text) {
  CrawlConfig cfg;
  cfg.raw_text = text;
  cfg.stop.max_pages = governor::kUnlimited;

  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string rest;
    std::getline(ls, rest);
    size_t b = rest.find_first_not_of(" \t");
    rest = b == std::string::npos ? "" : rest.substr(b);
    while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' '))
      rest.pop_back();
    auto toks = split_ws(rest);
    auto need_one = [&]() -> const std::string& {
      if (toks.size() != 1)
        fail(lineno, "key '" + key + "': expected exactly one value");
      return toks[0];
    };

    if (key == "seed") {
      auto url = urlkit::parse_url(need_one());
      if (!url)
        fail(lineno, "seed: " + std::string(urlkit::to_string(url.error())));
      cfg.seeds.push_back(*url);
    } else if (key == "topic") {
      for (const auto& t : toks) cfg.topic.push_back(lower(t));
    } else if (key == "downloaders") {
      uint64_t n = parse_count(need_one(), lineno, "downloaders");
      if (n < 1) fail(lineno, "downloaders must be >= 1");
      cfg.n_downloaders = static_cast<int>(n);
    } else if (key == "frontier_capacity") {
      uint64_t n = parse_count(need_one(), lineno, "frontier_capacity");
      if (n < 1) fail(lineno, "frontier_capacity must be >= 1");
      cfg.frontier_capacity = n;
    } else if (key == "host_interval_seconds") {
      double v = parse_number(need_one(), lineno, "host_interval_seconds");
      if (v < 0) fail(lineno, "host_interval_seconds must be >= 0");
      cfg.host_interval_seconds = v;
    } else if (key == "rate") {
      if (toks.size() != 3) fail(lineno, "rate: expected start end pages_per_sec");
      governor::RateProfile::Bucket bucket;
      bucket.start_hour = static_cast<int>(parse_count(toks[0], lineno, "rate"));
      bucket.end_hour = static_cast<int>(parse_count(toks[1], lineno, "rate"));
      bucket.pages_per_second =
          toks[2] == "unlimited" ? governor::kUnlimitedRate
                                 : parse_number(toks[2], lineno, "rate");
      cfg.rate_profile.buckets.push_back(bucket);
    } else if (key == "rate_default") {
      const std::string& v = need_one();
      cfg.rate_profile.default_rate =
          v == "unlimited" ? governor::kUnlimitedRate
                           : parse_number(v, lineno, "rate_default");
    } else if (key == "tz_offset_seconds") {
      cfg.tz_offset_seconds = parse_number(need_one(), lineno, "tz_offset_seconds");
    } else if (key == "max_pages") {
      const std::string& v = need_one();
      cfg.stop.max_pages = v == "unlimited"
                               ? governor::kUnlimited
                               : parse_count(v, lineno, "max_pages");
    } else if (key == "max_duration_seconds") {
      const std::string& v = need_one();
      cfg.stop.max_duration_seconds =
          v == "unlimited" ? std::numeric_limits<double>::infinity()
                           : parse_number(v, lineno, "max_duration_seconds");
    } else if (key == "max_depth") {
      const std::string& v = need_one();
      cfg.stop.max_depth =
          v == "unlimited"
              ? std::numeric_limits<uint32_t>::max()
              : static_cast<uint32_t>(parse_count(v, lineno, "max_depth"));
    } else if (key == "checkpoint_pages") {
      uint64_t n = parse_count(need_one(), lineno, "checkpoint_pages");
      if (n < 1) fail(lineno, "checkpoint_pages must be >= 1");
      cfg.checkpoint_pages = n;
    } else if (key == "checkpoint_seconds") {
      double v = parse_number(need_one(), lineno, "checkpoint_seconds");
      if (v <= 0) fail(lineno, "checkpoint_seconds must be > 0");
      cfg.checkpoint_seconds = v;
    } else if (key == "user_agent") {
      if (rest.empty()) fail(lineno, "user_agent must not be empty");
      cfg.fetch.user_agent = rest;
    } else if (key == "timeout_seconds") {
      double v = parse_number(need_one(), lineno, "timeout_seconds");
      if (v <= 0) fail(lineno, "timeout_seconds must be > 0");
      cfg.fetch.timeout_seconds = v;
    } else if (key == "max_body_bytes") {
      uint64_t n = parse_count(need_one(), lineno, "max_body_bytes");
      if (n < 1) fail(lineno, "max_body_bytes must be >= 1");
      cfg.fetch.max_body_bytes = n;
    } else if (key == "max_redirect_hops") {
      cfg.fetch.max_redirect_hops =
          static_cast<int>(parse_count(need_one(), lineno, "max_redirect_hops"));
    } else if (key == "run_dir") {
      cfg.run_dir = need_one();
    } else if (key == "rng_seed") {
      cfg.rng_seed = parse_count(need_one(), lineno, "rng_seed");
    } else if (key == "quarantine_failures") {
      uint64_t n = parse_count(need_one(), lineno, "quarantine_failures");
      if (n < 1) fail(lineno, "quarantine_failures must be >= 1");
      cfg.quarantine_failures = static_cast<uint32_t>(n);
    } else if (key == "map") {
      if (toks.size() != 2) fail(lineno, "map: expected host address:port");
      std::string addr = toks[1];
      size_t colon = addr.rfind(':');
      if (colon == std::string::npos) fail(lineno, "map: expected address:port");
      int port = static_cast<int>(
          parse_count(addr.substr(colon + 1), lineno, "map"));
      cfg.host_map[lower(toks[0])] = {addr.substr(0, colon), port};
    } else if (key == "sim_seed") {
      cfg.sim.seed = parse_count(need_one(), lineno, "sim_seed");
    } else if (key == "sim_pages") {
      cfg.sim.pages = static_cast<uint32_t>(
          parse_count(need_one(), lineno, "sim_pages"));
    } else if (key == "sim_hosts") {
      cfg.sim.hosts = static_cast<uint32_t>(
          parse_count(need_one(), lineno, "sim_hosts"));
    } else if (key == "sim_out_degree_mean") {
      cfg.sim.out_degree_mean = parse_number(need_one(), lineno, key.c_str());
    } else if (key == "sim_lambda_min") {
      cfg.sim.lambda_min = parse_number(need_one(), lineno, key.c_str());
    } else if (key == "sim_lambda_max") {
      cfg.sim.lambda_max = parse_number(need_one(), lineno, key.c_str());
    } else if (key == "revisit_horizon") {
      cfg.sim.revisit_horizon = parse_number(need_one(), lineno, key.c_str());
    } else if (key == "revisit_sample_interval") {
      cfg.sim.revisit_sample_interval =
          parse_number(need_one(), lineno, key.c_str());
    } else if (key == "revisit_grid_resolution") {
      cfg.sim.revisit_grid_resolution =
          parse_number(need_one(), lineno, key.c_str());
    } else {
      fail(lineno, "unknown key '" + key + "'");
    }
  }

  if (cfg.seeds.empty()) throw ConfigError("config: at least one seed required");
  if (cfg.fetch.user_agent.find("http") == std::string::npos)
    throw ConfigError("config: user_agent must include a contact URL");
  if (auto err = cfg.rate_profile.validate())
    throw ConfigError("config: " + *err);
  return cfg;
}

CrawlConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

}  // namespace epow::crawlctl
