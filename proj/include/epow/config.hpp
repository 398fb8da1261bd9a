#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "epow/fetchnet.hpp"
#include "epow/governor.hpp"
#include "epow/urlkit.hpp"

namespace epow::crawlctl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Synthetic-site parameters used by the revisit subcommand to regenerate
/// the simulation the baseline crawl ran against.
struct SimSection {
  uint64_t seed = 1;
  uint32_t pages = 50;
  uint32_t hosts = 5;
  double out_degree_mean = 3.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double revisit_horizon = 50.0;
  double revisit_sample_interval = 0.5;
  double revisit_grid_resolution = 0.1;
};

struct CrawlConfig {
  std::vector<urlkit::CanonicalUrl> seeds;
  std::vector<std::string> topic;
  int n_downloaders = 4;
  size_t frontier_capacity = 4096;
  double host_interval_seconds = 20.0;  // politeness default
  governor::RateProfile rate_profile;
  double tz_offset_seconds = 0.0;
  governor::StopConditions stop;
  uint64_t checkpoint_pages = 100;
  double checkpoint_seconds = 60.0;
  fetchnet::FetchPolicy fetch;
  std::filesystem::path run_dir = "run";
  uint64_t rng_seed = 1;
  uint32_t quarantine_failures = 10;
  /// host -> (address, port) routing for crawling a local simulation.
  std::map<std::string, std::pair<std::string, int>> host_map;
  SimSection sim;

  std::string raw_text;  // exact file bytes, digested into checkpoints
};

/// Parse and validate a config file: one `key value` per line, `#` comments.
/// Unknown keys and invalid values raise ConfigError naming the line.
CrawlConfig load_config(const std::filesystem::path& path);
CrawlConfig parse_config(const std::string& text);

}  // namespace epow::crawlctl
