#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cocycle_forge/experiment.hpp"

namespace cf = cocycle_forge;

namespace {

struct Overrides {
  std::vector<double> lambdas;
  std::optional<double> eps;
  std::optional<std::int64_t> grid;
};

int run_config(const std::string& path, const std::string& kind, const Overrides& ov,
               std::optional<unsigned> threads, const std::string& out_dir) {
  cf::ConfigMap raw = cf::config::parse_file(path);
  if (!kind.empty()) raw["experiment.kind"] = kind;
  if (!ov.lambdas.empty()) {
    std::string s;
    for (double l : ov.lambdas) s += (s.empty() ? "" : ", ") + cf::fmt(l);
    raw["experiment.lambdas"] = s;
  }
  if (ov.eps) raw["experiment.eps"] = cf::fmt(*ov.eps);
  if (ov.grid) raw["grid.size"] = std::to_string(*ov.grid);

  cf::ExperimentConfig c = cf::load_config(raw);
  c.threads = cf::resolve_threads(threads, c.threads);
  const std::string dir = out_dir.empty() ? c.output_dir : out_dir;

  const auto t0 = std::chrono::steady_clock::now();
  const cf::RunResult r = cf::run_experiment(c);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cf::write_outputs(c, r, wall, dir);

  std::printf("%s: wrote %zu table(s) to %s (config_hash=%s, %.2f s)\n", c.kind.c_str(), r.tables.size(),
              dir.c_str(), c.hash.c_str(), wall);
  for (const auto& a : r.anomalies) std::fprintf(stderr, "anomaly: %s\n", a.c_str());
  return r.anomalies.empty() ? cf::exit_ok : cf::exit_anomaly;
}

int list_entries(const std::string& registry_file) {
  cf::ConfigMap custom;
  if (!registry_file.empty()) custom = cf::config::parse_file(registry_file);
  for (const auto& e : cf::list_registry(custom)) {
    std::printf("%-5s %-20s %s\n", e.category.c_str(), e.name.c_str(), e.parameters.c_str());
  }
  return cf::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolized twisted cohomological equations: solver, averages, drift and oracles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cf::kVersion));

  std::optional<unsigned> threads;
  std::string out_dir;
  std::string config_path;
  std::string registry_file;
  Overrides ov;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config file")->required();
    sub->add_option("--threads", threads, "worker threads (overrides env and config)")->check(CLI::Range(1, 1024));
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
  };

  auto* run = app.add_subcommand("run", "run the experiment named by experiment.kind");
  add_common(run);
  auto* list = app.add_subcommand("list", "list registry entries");
  list->add_option("registry", registry_file, "config file with registry.rho.<name>.* entries");

  std::vector<std::pair<std::string, CLI::App*>> kinds;
  for (const char* k : {"solve", "sweep", "drift", "displacement", "theoremB", "averaging", "oracle-check"}) {
    auto* sub = app.add_subcommand(k, std::string("run a config as experiment.kind = ") + k);
    add_common(sub);
    sub->add_option("--lambda", ov.lambdas, "lambda value(s), replaces experiment.lambdas");
    sub->add_option("--eps", ov.eps, "series tail tolerance");
    sub->add_option("--grid", ov.grid, "grid size");
    kinds.emplace_back(k, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cf::exit_config;
  }

  try {
    if (list->parsed()) return list_entries(registry_file);
    if (run->parsed()) return run_config(config_path, "", ov, threads, out_dir);
    for (const auto& [k, sub] : kinds) {
      if (sub->parsed()) return run_config(config_path, k, ov, threads, out_dir);
    }
  } catch (const cf::InvalidInput& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return cf::exit_config;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cf::exit_failure;
  }
  return cf::exit_failure;
}
