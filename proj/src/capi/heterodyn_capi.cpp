#include "heterodyn.h"

#include <cstring>
#include <new>
#include <string>

#include "core/runner.hpp"
#include "core/scenario.hpp"
#include "core/typegrid.hpp"

struct hd_scenario {
  heterodyn::ScenarioConfig cfg;
};

struct hd_grid {
  heterodyn::TypeGrid grid;
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

hd_status fail(hd_status code, const std::string& msg) {
  set_error(msg);
  return code;
}

// Runs the body and maps exceptions onto status codes.
template <typename Fn>
hd_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const heterodyn::ScenarioError& e) {
    return fail(HD_ERR_VALIDATION, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(HD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HD_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(HD_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(HD_ERR_RUNTIME, "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hd_status map_state(const hd_grid* g, const double* data, int n_strategies,
                    const char* who, heterodyn::Matrix& m) {
  if (!g || !data)
    return fail(HD_ERR_INVALID_ARGUMENT, std::string(who) + ": null argument");
  if (n_strategies < 1)
    return fail(HD_ERR_INVALID_ARGUMENT,
                std::string(who) + ": n_strategies must be positive");
  int k = g->grid.size();
  m.resize(k, n_strategies);
  for (int r = 0; r < k; ++r)
    for (int s = 0; s < n_strategies; ++s)
      m(r, s) = data[static_cast<size_t>(r) * n_strategies + s];
  return HD_OK;
}

}  // namespace

extern "C" {

const char* hd_version(void) { return "0.1.0"; }

const char* hd_last_error(void) { return t_last_error.c_str(); }

hd_status hd_scenario_parse(const char* json_text, hd_scenario** out) {
  if (!json_text || !out)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_parse: null argument");
  *out = nullptr;
  return guarded([&]() -> hd_status {
    auto cfg = heterodyn::ScenarioConfig::parse(json_text);
    *out = new hd_scenario{std::move(cfg)};
    return HD_OK;
  });
}

hd_status hd_scenario_load(const char* path, hd_scenario** out) {
  if (!path || !out)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_load: null argument");
  *out = nullptr;
  try {
    auto cfg = heterodyn::load_scenario_file(path);
    *out = new hd_scenario{std::move(cfg)};
    return HD_OK;
  } catch (const heterodyn::ScenarioError& e) {
    return fail(HD_ERR_VALIDATION, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HD_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(HD_ERR_IO, e.what());
  }
}

void hd_scenario_free(hd_scenario* sc) { delete sc; }

const char* hd_scenario_name(const hd_scenario* sc) {
  return sc ? sc->cfg.name.c_str() : "";
}

hd_status hd_scenario_to_json(const hd_scenario* sc, char** out) {
  if (!sc || !out)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_to_json: null argument");
  return guarded([&]() -> hd_status {
    *out = dup_string(sc->cfg.serialize());
    return *out ? HD_OK : fail(HD_ERR_RUNTIME, "out of memory");
  });
}

void hd_string_free(char* s) { delete[] s; }

hd_status hd_scenario_set_seed(hd_scenario* sc, uint64_t seed) {
  if (!sc) return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_set_seed: null handle");
  if (sc->cfg.initial_state.kind == heterodyn::InitialStateSpec::Kind::Random)
    sc->cfg.initial_state.seed = seed;
  sc->cfg.potential_check.seed = seed;
  sc->cfg.probe.seed = seed;
  sc->cfg.assumptions.seed = seed;
  return HD_OK;
}

hd_status hd_scenario_set_dt(hd_scenario* sc, double dt) {
  if (!sc) return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_set_dt: null handle");
  if (!(dt > 0.0))
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_set_dt: dt must be positive");
  sc->cfg.integrator.dt = dt;
  return HD_OK;
}

hd_status hd_scenario_set_t_end(hd_scenario* sc, double t_end) {
  if (!sc) return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_set_t_end: null handle");
  if (!(t_end >= 0.0))
    return fail(HD_ERR_INVALID_ARGUMENT,
                "hd_scenario_set_t_end: t_end must be nonnegative");
  sc->cfg.integrator.t_end = t_end;
  return HD_OK;
}

hd_status hd_scenario_set_out_dir(hd_scenario* sc, const char* dir) {
  if (!sc || !dir || !*dir)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_scenario_set_out_dir: null or empty");
  sc->cfg.outputs.dir = dir;
  return HD_OK;
}

hd_status hd_run(hd_scenario* sc, const char* command, int* exit_code,
                 char** summary_out) {
  if (!sc || !command || !exit_code)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_run: null argument");
  *exit_code = 2;
  if (summary_out) *summary_out = nullptr;
  return guarded([&]() -> hd_status {
    heterodyn::RunOutcome outcome = heterodyn::run_scenario(sc->cfg, command);
    *exit_code = outcome.exit_code;
    if (outcome.exit_code != 0 && outcome.summary.contains("failures") &&
        !outcome.summary["failures"].empty())
      set_error(outcome.summary["failures"].dump());
    if (summary_out) {
      *summary_out = dup_string(outcome.summary.dump(2) + "\n");
      if (!*summary_out) return fail(HD_ERR_RUNTIME, "out of memory");
    }
    return HD_OK;
  });
}

hd_status hd_grid_build(const hd_scenario* sc, hd_grid** out) {
  if (!sc || !out)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_grid_build: null argument");
  *out = nullptr;
  return guarded([&]() -> hd_status {
    *out = new hd_grid{sc->cfg.build_grid()};
    return HD_OK;
  });
}

void hd_grid_free(hd_grid* g) { delete g; }

int hd_grid_size(const hd_grid* g) { return g ? g->grid.size() : -1; }

int hd_grid_dim(const hd_grid* g) { return g ? g->grid.dim() : -1; }

hd_status hd_grid_nodes(const hd_grid* g, double* out, size_t len) {
  if (!g || !out) return fail(HD_ERR_INVALID_ARGUMENT, "hd_grid_nodes: null argument");
  size_t need = static_cast<size_t>(g->grid.size()) * g->grid.dim();
  if (len != need)
    return fail(HD_ERR_INVALID_ARGUMENT,
                "hd_grid_nodes: buffer length " + std::to_string(len) +
                    " does not match size*dim = " + std::to_string(need));
  const heterodyn::Matrix& nodes = g->grid.nodes();
  for (int k = 0; k < nodes.rows(); ++k)
    for (int d = 0; d < nodes.cols(); ++d)
      out[static_cast<size_t>(k) * nodes.cols() + d] = nodes(k, d);
  return HD_OK;
}

hd_status hd_grid_weights(const hd_grid* g, double* out, size_t len) {
  if (!g || !out)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_grid_weights: null argument");
  if (len != static_cast<size_t>(g->grid.size()))
    return fail(HD_ERR_INVALID_ARGUMENT,
                "hd_grid_weights: buffer length does not match the node count");
  const heterodyn::Vector& w = g->grid.weights();
  for (int k = 0; k < w.size(); ++k) out[static_cast<size_t>(k)] = w(k);
  return HD_OK;
}

hd_status hd_grid_aggregate(const hd_grid* g, const double* state,
                            int n_strategies, double* out) {
  heterodyn::Matrix m;
  hd_status st = map_state(g, state, n_strategies, "hd_grid_aggregate", m);
  if (st != HD_OK) return st;
  if (!out) return fail(HD_ERR_INVALID_ARGUMENT, "hd_grid_aggregate: null out");
  return guarded([&]() -> hd_status {
    heterodyn::Vector xbar = heterodyn::aggregate(m, g->grid);
    for (int s = 0; s < xbar.size(); ++s) out[static_cast<size_t>(s)] = xbar(s);
    return HD_OK;
  });
}

hd_status hd_grid_variational_norm(const hd_grid* g, const double* delta,
                                   int n_strategies, double* out) {
  heterodyn::Matrix m;
  hd_status st = map_state(g, delta, n_strategies, "hd_grid_variational_norm", m);
  if (st != HD_OK) return st;
  if (!out)
    return fail(HD_ERR_INVALID_ARGUMENT, "hd_grid_variational_norm: null out");
  return guarded([&]() -> hd_status {
    *out = heterodyn::variational_norm(m, g->grid);
    return HD_OK;
  });
}

}  // extern "C"
