#include "ibex/ibex.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "ibex/simulator.hpp"

struct ibex_sim {
  std::unique_ptr<ibex::Simulator> sim;
};

namespace {

thread_local std::string g_last_error;

ibex_status fail(ibex_status code, std::string message) {
  g_last_error = std::move(message);
  return code;
}

template <class F>
ibex_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return IBEX_OK;
  } catch (const ibex::ConfigError& e) {
    return fail(IBEX_ERR_CONFIG, e.what());
  } catch (const ibex::TraceError& e) {
    return fail(IBEX_ERR_TRACE, e.what());
  } catch (const ibex::CapacityExhausted& e) {
    return fail(IBEX_ERR_CAPACITY, e.what());
  } catch (const ibex::AddressFault& e) {
    return fail(IBEX_ERR_ADDRESS, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(IBEX_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(IBEX_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(IBEX_ERR_INTERNAL, "unknown error");
  }
}

ibex::RunConfig make_config(const char* path, const char* const* overrides, size_t n) {
  ibex::RunConfig c;
  if (path && *path) c.apply_file(path);
  for (size_t i = 0; i < n; ++i) {
    if (!overrides[i]) throw ibex::ConfigError("null override");
    const std::string kv = overrides[i];
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ibex::ConfigError("override '" + kv + "' is not key=value");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* ibex_version(void) { return "0.1.0"; }
const char* ibex_last_error(void) { return g_last_error.c_str(); }
void ibex_string_free(char* s) { std::free(s); }

ibex_status ibex_parse_size(const char* text, uint64_t* out) {
  if (!text || !out) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  return guard([&] { *out = ibex::parse_size(text); });
}

ibex_status ibex_sim_create(const char* config_path, const char* const* overrides, size_t n_overrides,
                            ibex_sim** out) {
  if (!out || (n_overrides && !overrides)) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guard([&] {
    auto h = std::make_unique<ibex_sim>();
    h->sim = std::make_unique<ibex::Simulator>(make_config(config_path, overrides, n_overrides));
    *out = h.release();
  });
}

void ibex_sim_destroy(ibex_sim* sim) { delete sim; }

ibex_status ibex_sim_load_trace(ibex_sim* sim) {
  if (!sim) return fail(IBEX_ERR_INVALID_ARG, "null simulator");
  return guard([&] { sim->sim->load_configured_trace(); });
}

ibex_status ibex_sim_run(ibex_sim* sim) {
  if (!sim) return fail(IBEX_ERR_INVALID_ARG, "null simulator");
  return guard([&] { sim->sim->run(); });
}

ibex_status ibex_sim_access(ibex_sim* sim, int is_write, uint64_t ospa, const uint8_t* payload64, uint8_t* out64,
                            uint64_t* latency_ps) {
  if (!sim) return fail(IBEX_ERR_INVALID_ARG, "null simulator");
  return guard([&] {
    ibex::Line payload{};
    if (payload64) std::memcpy(payload.data(), payload64, payload.size());
    const auto r = sim->sim->access(is_write ? ibex::Op::Write : ibex::Op::Read, ibex::Ospa{ospa},
                                    is_write && payload64 ? &payload : nullptr);
    if (out64) std::memcpy(out64, r.data.data(), r.data.size());
    if (latency_ps) *latency_ps = r.latency;
  });
}

ibex_status ibex_sim_traffic(const ibex_sim* sim, const char* category, uint64_t* out) {
  if (!sim || !category || !out) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  const auto& t = sim->sim->traffic();
  if (std::strcmp(category, "total") == 0) {
    *out = t.total();
    return IBEX_OK;
  }
  const auto c = ibex::category_from_string(category);
  if (!c) return fail(IBEX_ERR_INVALID_ARG, std::string("unknown traffic category ") + category);
  *out = t.count(*c);
  return IBEX_OK;
}

ibex_status ibex_sim_report_json(const ibex_sim* sim, char** out) {
  if (!sim || !out) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  return guard([&] { *out = dup(sim->sim->report_json()); });
}

ibex_status ibex_sim_write_outputs(const ibex_sim* sim, const char* dir) {
  if (!sim || !dir) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  const ibex_status s = guard([&] { sim->sim->write_outputs(dir); });
  return s == IBEX_ERR_INTERNAL ? fail(IBEX_ERR_IO, g_last_error) : s;
}

ibex_status ibex_sim_dump_meta(const ibex_sim* sim, char** out) {
  if (!sim || !out) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  return guard([&] { *out = dup(sim->sim->dump_meta()); });
}

ibex_status ibex_sweep(const char* config_path, const char* const* overrides, size_t n_overrides, const char* axis,
                       const char* const* values, size_t n_values, const char* out_dir, char** out_json) {
  if (!axis || (n_values && !values) || (n_overrides && !overrides)) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  return guard([&] {
    std::vector<std::string> v;
    for (size_t i = 0; i < n_values; ++i) v.emplace_back(values[i] ? values[i] : "");
    const std::string json =
        ibex::run_sweep(make_config(config_path, overrides, n_overrides), axis, v, out_dir ? out_dir : "");
    if (out_json) *out_json = dup(json);
  });
}

ibex_status ibex_ablate(const char* config_path, const char* const* overrides, size_t n_overrides,
                        const char* out_dir, char** out_json) {
  if (n_overrides && !overrides) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  return guard([&] {
    const std::string json = ibex::run_ablation(make_config(config_path, overrides, n_overrides), out_dir ? out_dir : "");
    if (out_json) *out_json = dup(json);
  });
}

ibex_status ibex_gen_trace(const char* config_path, const char* const* overrides, size_t n_overrides,
                           const char* path, int binary) {
  if (!path || (n_overrides && !overrides)) return fail(IBEX_ERR_INVALID_ARG, "null argument");
  return guard([&] {
    const auto trace = ibex::make_trace(make_config(config_path, overrides, n_overrides));
    if (binary)
      ibex::save_binary_trace(*trace, path);
    else
      ibex::save_text_trace(*trace, path);
  });
}

ibex_status ibex_pagefault(const char* trace_path, uint64_t capacity_bytes, int mode, ibex_pagefault_result* out) {
  if (!trace_path || !out || (mode != 0 && mode != 1)) return fail(IBEX_ERR_INVALID_ARG, "bad argument");
  return guard([&] {
    const auto t = ibex::load_trace(trace_path);
    const auto r = ibex::pagefault_analysis(
        t, capacity_bytes, mode ? ibex::PagefaultMode::Ibex : ibex::PagefaultMode::Uncompressed);
    *out = {r.accesses, r.cold_faults, r.capacity_faults, r.resident_bytes_peak};
  });
}

}  // extern "C"
