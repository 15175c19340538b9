// Command-line front end. All domain work happens behind the shared
// library's C interface; this file only parses flags, forwards the run, and
// renders the summary.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "heterodyn.h"

namespace {

struct ScenarioDeleter {
  void operator()(hd_scenario* sc) const { hd_scenario_free(sc); }
};
using ScenarioHandle = std::unique_ptr<hd_scenario, ScenarioDeleter>;

struct Options {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double dt = 0.0;
  bool dt_set = false;
  double t_end = 0.0;
  bool t_end_set = false;
};

void print_summary(const std::string& text) {
  nlohmann::json summary = nlohmann::json::parse(text, nullptr, false);
  if (summary.is_discarded()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::printf("%s: %s\n", summary.value("command", std::string("run")).c_str(),
              summary.value("name", std::string("?")).c_str());
  if (summary.contains("grid"))
    std::printf("  grid: %d node(s), type dimension %d, %d strategies\n",
                summary["grid"].value("nodes", 0), summary["grid"].value("dim", 0),
                summary.value("strategies", 0));
  if (summary.contains("simulate")) {
    const auto& sim = summary["simulate"];
    std::printf("  terminal time %.6g  residual %.3e  renorm %.3e\n",
                sim.value("terminal_time", 0.0), sim.value("terminal_residual", 0.0),
                sim.value("renorm_total", 0.0));
    if (sim.contains("potential") && sim["potential"].value("available", false))
      std::printf("  potential: %.9g -> %.9g (%s)\n",
                  sim["potential"].value("initial", 0.0),
                  sim["potential"].value("final", 0.0),
                  sim["potential"].value("nondecreasing", false)
                      ? "nondecreasing"
                      : "NOT monotone");
  }
  if (summary.contains("equilibrium")) {
    const auto& eq = summary["equilibrium"];
    std::printf("  %s after %d iteration(s): residual %.3e, br violation %.3e\n",
                eq.value("converged", false) ? "converged" : "did not converge",
                eq.value("iterations", 0), eq.value("residual", 0.0),
                eq.value("br_violation", 0.0));
  }
  if (summary.contains("potential_check")) {
    const auto& pc = summary["potential_check"];
    std::printf("  gradient check: max relative error %.3e", pc.value("max_rel_error", 0.0));
    if (pc.contains("median_order") && pc["median_order"].is_number())
      std::printf(", median order %.3f", pc["median_order"].get<double>());
    std::printf("\n");
  }
  if (summary.contains("aggregability"))
    std::printf("  aggregate-velocity spread: %.6e over %d state(s)\n",
                summary["aggregability"].value("spread", 0.0),
                summary["aggregability"].value("n_states", 0));
  if (summary.contains("assumptions")) {
    const auto& a = summary["assumptions"];
    std::printf("  lipschitz ratio %.4g, rate bound %.4g, br band ratio %.4g\n",
                a.value("lipschitz_ratio_max", 0.0), a.value("rate_bound", 0.0),
                a.value("br_band_ratio_max", 0.0));
  }
  if (summary.contains("checks"))
    for (const auto& c : summary["checks"]) {
      if (c.value("skipped", false)) {
        std::printf("  [--] %s (%s)\n", c.value("name", std::string()).c_str(),
                    c.value("detail", std::string()).c_str());
        continue;
      }
      std::printf("  [%s] %s", c.value("passed", false) ? "ok" : "FAIL",
                  c.value("name", std::string()).c_str());
      if (c.contains("value")) std::printf("  value %.6e", c["value"].get<double>());
      if (c.contains("tolerance"))
        std::printf("  tolerance %.6e", c["tolerance"].get<double>());
      if (c.contains("detail"))
        std::printf("  (%s)", c.value("detail", std::string()).c_str());
      std::printf("\n");
    }
  if (summary.contains("failures") && !summary["failures"].empty()) {
    std::printf("failures:\n");
    for (const auto& f : summary["failures"])
      std::printf("  - %s\n", f.get<std::string>().c_str());
  }
}

int run_command(const std::string& command, const Options& opt) {
  hd_scenario* raw = nullptr;
  hd_status st = hd_scenario_load(opt.config.c_str(), &raw);
  if (st != HD_OK) {
    std::fprintf(stderr, "error: %s\n", hd_last_error());
    return st == HD_ERR_IO ? 3 : 2;
  }
  ScenarioHandle sc(raw);

  if (opt.seed_set) hd_scenario_set_seed(sc.get(), opt.seed);
  if (opt.dt_set && hd_scenario_set_dt(sc.get(), opt.dt) != HD_OK) {
    std::fprintf(stderr, "error: %s\n", hd_last_error());
    return 2;
  }
  if (opt.t_end_set && hd_scenario_set_t_end(sc.get(), opt.t_end) != HD_OK) {
    std::fprintf(stderr, "error: %s\n", hd_last_error());
    return 2;
  }
  if (!opt.out_dir.empty() &&
      hd_scenario_set_out_dir(sc.get(), opt.out_dir.c_str()) != HD_OK) {
    std::fprintf(stderr, "error: %s\n", hd_last_error());
    return 2;
  }

  int exit_code = 0;
  char* summary = nullptr;
  st = hd_run(sc.get(), command.c_str(), &exit_code, &summary);
  if (st != HD_OK) {
    std::fprintf(stderr, "error: %s\n", hd_last_error());
    return 4;
  }
  if (summary) {
    print_summary(summary);
    hd_string_free(summary);
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterodyn: evolutionary dynamics in heterogeneous populations"};
  app.set_version_flag("--version", std::string(hd_version()));
  app.require_subcommand(1);

  const std::vector<std::string> commands = {
      "simulate", "equilibrium", "potential-check", "aggregability-demo",
      "assumptions"};
  const std::vector<std::string> descriptions = {
      "integrate the mean dynamic and write trajectory/diagnostics CSVs",
      "solve for an equilibrium strategy distribution by damped best response",
      "verify the potential's gradient property on random state/direction pairs",
      "measure the aggregate-velocity spread across equal-aggregate states",
      "estimate payoff regularity diagnostics on random state pairs"};

  Options opt;
  std::string chosen;
  for (size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i], descriptions[i]);
    sub->add_option("--config", opt.config, "scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory (overrides the scenario)");
    sub->add_option("--seed", opt.seed, "seed override for all seeded blocks")
        ->each([&](const std::string&) { opt.seed_set = true; });
    sub->add_option("--dt", opt.dt, "integrator step override")
        ->each([&](const std::string&) { opt.dt_set = true; });
    sub->add_option("--t-end", opt.t_end, "integration horizon override")
        ->each([&](const std::string&) { opt.t_end_set = true; });
    sub->callback([&chosen, name = commands[i]] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run_command(chosen, opt);
}
