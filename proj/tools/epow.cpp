#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "epow/clock.hpp"
#include "epow/crawlctl.hpp"
#include "epow/irmetrics.hpp"
#include "epow/revisit.hpp"
#include "epow/simweb.hpp"

namespace {

std::atomic<bool> g_interrupted{false};
void on_signal(int) { g_interrupted = true; }

bool is_local_host(const std::string& host) {
  return host == "localhost" || host == "127.0.0.1" ||
         (host.size() > 4 && host.substr(host.size() - 4) == ".sim");
}

int cmd_crawl(const std::string& config_path, bool resume) {
  auto config = epow::crawlctl::load_config(config_path);
  for (const auto& seed : config.seeds) {
    if (!is_local_host(seed.host) && !config.host_map.count(seed.host)) {
      std::cerr << "WARNING: seed " << seed.render()
                << " points at a non-local host. This crawler does not fetch "
                   "or honor robots.txt; do not aim it at servers you do not "
                   "control.\n";
    }
  }
  epow::SystemClock clock;
  epow::crawlctl::CrawlEngine engine(config, clock);
  auto report = engine.run(resume);
  std::cout << report.to_text();
  std::cout << "report written to " << (config.run_dir / "report.csv").string()
            << "\n";
  return 0;
}

int cmd_simulate(uint64_t seed, uint32_t pages, uint32_t hosts, bool gallery,
                 double duration, const std::string& log_path) {
  epow::SystemClock clock;
  epow::simweb::SiteGraph site;
  if (gallery) {
    site = epow::simweb::SiteGraph::gallery_fixture();
  } else {
    epow::simweb::SiteParams params;
    params.seed = seed;
    params.n_pages = pages;
    params.n_hosts = hosts;
    site = epow::simweb::SiteGraph::generate(params);
  }
  epow::simweb::ServeHandle handle(std::move(site), clock);
  std::cout << "listening on 127.0.0.1:" << handle.port() << " ("
            << handle.page_count() << " pages)\n";
  std::cout << "virtual hosts, as config `map` lines:\n";
  std::set<std::string> host_names;
  for (uint32_t i = 0; i < handle.page_count(); ++i)
    host_names.insert(handle.url_of(i).host);
  for (const auto& h : host_names)
    std::cout << "  map " << h << " 127.0.0.1:" << handle.port() << "\n";
  std::cout << "seed suggestion: seed " << handle.url_of(0).render() << "\n";
  std::cout.flush();

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  double waited = 0;
  while (!g_interrupted && (duration <= 0 || waited < duration)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    waited += 0.1;
  }

  std::ofstream log(log_path);
  log << epow::simweb::request_log_csv(handle.request_log());
  std::cout << "request log (" << handle.request_count() << " entries) -> "
            << log_path << "\n";
  return 0;
}

int cmd_revisit(const std::string& config_path, const std::string& policy_name,
                double budget, bool bootstrap) {
  auto config = epow::crawlctl::load_config(config_path);
  auto policy = epow::revisit::policy_from_string(policy_name);
  if (!policy) {
    std::cerr << "unknown policy: " << policy_name
              << " (uniform|proportional|optimal-freshness|optimal-age)\n";
    return 2;
  }

  epow::SimClock clock(epow::SystemClock().now());
  epow::simweb::SiteParams params;
  params.seed = config.sim.seed;
  params.n_pages = config.sim.pages;
  params.n_hosts = config.sim.hosts;
  params.out_degree_mean = config.sim.out_degree_mean;
  params.lambda_min = config.sim.lambda_min;
  params.lambda_max = config.sim.lambda_max;
  epow::simweb::ServeHandle web(epow::simweb::SiteGraph::generate(params),
                                clock);

  bool have_baseline;
  {
    epow::store::PageRepo probe(config.run_dir);
    have_baseline = !probe.empty();
  }
  if (!have_baseline) {
    if (!bootstrap) {
      std::cerr << "no baseline crawl in " << config.run_dir.string()
                << "; run `epow crawl` first or pass --bootstrap\n";
      return 2;
    }
    auto crawl_config = config;
    crawl_config.host_interval_seconds = 0;
    crawl_config.rate_profile = {};
    crawl_config.rate_profile.default_rate = epow::governor::kUnlimitedRate;
    crawl_config.seeds = {web.url_of(0)};
    epow::crawlctl::CrawlEngine engine(crawl_config, clock, web.router());
    auto report = engine.run();
    std::cout << "baseline crawl: " << report.pages_fetched << " pages ("
              << report.stop_reason << ")\n";
  }
  epow::store::PageRepo repo(config.run_dir);

  std::vector<uint32_t> ids(web.page_count());
  std::vector<double> lambdas(web.page_count());
  for (uint32_t i = 0; i < web.page_count(); ++i) {
    ids[i] = i;
    lambdas[i] = web.lambda_of(i);
  }

  epow::revisit::PlanParams plan_params;
  plan_params.grid_resolution = config.sim.revisit_grid_resolution;
  plan_params.age_horizon = config.sim.revisit_horizon;
  auto plan = epow::revisit::plan_revisits(*policy, lambdas, budget, plan_params);

  std::ofstream plan_file(config.run_dir / "plan.csv");
  plan_file << plan.export_csv(lambdas);

  auto report = epow::crawlctl::run_revisit_loop(
      web, repo, clock, plan, ids, config.sim.revisit_horizon,
      config.sim.revisit_sample_interval, config.rng_seed, config.fetch);
  std::cout << report.to_text();
  std::cout << "plan written to " << (config.run_dir / "plan.csv").string()
            << "\n";
  return 0;
}

std::vector<std::string> read_id_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

int cmd_eval(const std::string& run_path, const std::string& relevant_path) {
  auto ranking = read_id_lines(run_path);
  auto relevant_lines = read_id_lines(relevant_path);
  epow::irmetrics::DocSet relevant(relevant_lines.begin(), relevant_lines.end());

  auto curve = epow::irmetrics::pr_curve(ranking, relevant);
  std::cout << curve.to_csv();

  epow::irmetrics::DocSet retrieved(ranking.begin(), ranking.end());
  epow::irmetrics::DocSet corpus = retrieved;
  corpus.insert(relevant.begin(), relevant.end());
  auto parts = epow::irmetrics::partition(retrieved, relevant, corpus);
  std::cout << epow::irmetrics::format_summary(parts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPOW: a polite, parallel web-crawler engine"};
  app.require_subcommand(1);

  std::string config_path, policy = "uniform", run_file, relevant_file;
  std::string log_path = "requests.csv";
  bool resume = false, gallery = false, bootstrap = false;
  uint64_t seed = 1;
  uint32_t pages = 50, hosts = 5;
  double duration = 0, budget = 10;

  auto* crawl = app.add_subcommand("crawl", "run a crawl from a config file");
  crawl->add_option("--config", config_path, "config file")->required();
  crawl->add_flag("--resume", resume, "resume from the latest checkpoint");

  auto* simulate =
      app.add_subcommand("simulate", "serve a deterministic synthetic web");
  simulate->add_option("--seed", seed, "site graph seed");
  simulate->add_option("--pages", pages, "number of pages");
  simulate->add_option("--hosts", hosts, "number of virtual hosts");
  simulate->add_flag("--gallery", gallery, "serve the 48-URL gallery fixture");
  simulate->add_option("--duration", duration,
                       "seconds to serve (0 = until interrupted)");
  simulate->add_option("--log", log_path, "request log output file");

  auto* revisit =
      app.add_subcommand("revisit", "run a revisit plan against the store");
  revisit->add_option("--config", config_path, "config file")->required();
  revisit->add_option("--policy", policy,
                      "uniform|proportional|optimal-freshness|optimal-age");
  revisit->add_option("--budget", budget, "total revisit frequency budget");
  revisit->add_flag("--bootstrap", bootstrap,
                    "run the baseline crawl first if the store is empty");

  auto* eval = app.add_subcommand("eval", "precision/recall evaluation");
  eval->add_option("--run", run_file, "ranked doc ids, one per line")
      ->required();
  eval->add_option("--relevant", relevant_file, "relevant doc ids")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (crawl->parsed()) return cmd_crawl(config_path, resume);
    if (simulate->parsed())
      return cmd_simulate(seed, pages, hosts, gallery, duration, log_path);
    if (revisit->parsed())
      return cmd_revisit(config_path, policy, budget, bootstrap);
    if (eval->parsed()) return cmd_eval(run_file, relevant_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
