// ibexsim: command-line front end over the ibex C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ibex/ibex.h"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string trace;
  std::string baseline;
};

int exit_code(ibex_status s) {
  switch (s) {
    case IBEX_OK: return 0;
    case IBEX_ERR_CONFIG:
    case IBEX_ERR_INVALID_ARG: return 2;
    case IBEX_ERR_TRACE: return 3;
    case IBEX_ERR_CAPACITY: return 4;
    default: return 1;
  }
}

int report(ibex_status s) {
  if (s != IBEX_OK) std::cerr << "ibexsim: " << ibex_last_error() << '\n';
  return exit_code(s);
}

std::vector<std::string> overrides(const Common& c) {
  std::vector<std::string> v = c.sets;
  if (!c.trace.empty()) v.push_back("trace=" + c.trace);
  if (!c.baseline.empty()) v.push_back("baseline=" + c.baseline);
  return v;
}

std::vector<const char*> cstrs(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* config_path(const Common& c) { return c.config.empty() ? nullptr : c.config.c_str(); }

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "key=value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override a config key (key=value), repeatable");
  app->add_option("--trace", c.trace, "trace file, or 'synthetic'");
  app->add_option("--baseline", c.baseline, "ibex or uncompressed");
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// Runs a simulation and leaves the handle to the caller.
ibex_status simulate(const Common& c, ibex_sim** sim) {
  const auto ov = overrides(c);
  const auto ptrs = cstrs(ov);
  ibex_status s = ibex_sim_create(config_path(c), ptrs.data(), ptrs.size(), sim);
  if (s != IBEX_OK) return s;
  s = ibex_sim_run(*sim);
  if (s != IBEX_OK) {
    ibex_sim_destroy(*sim);
    *sim = nullptr;
  }
  return s;
}

int cmd_run(const Common& c, const std::string& out_dir) {
  ibex_sim* sim = nullptr;
  ibex_status s = simulate(c, &sim);
  if (s != IBEX_OK) return report(s);
  s = ibex_sim_write_outputs(sim, out_dir.c_str());
  if (s == IBEX_OK) {
    std::uint64_t total = 0, data = 0;
    ibex_sim_traffic(sim, "total", &total);
    ibex_sim_traffic(sim, "external_data", &data);
    std::cout << "accesses " << total << " (data " << data << "), reports in " << out_dir << '\n';
  }
  ibex_sim_destroy(sim);
  return report(s);
}

int cmd_dump_meta(const Common& c, const std::string& out) {
  ibex_sim* sim = nullptr;
  ibex_status s = simulate(c, &sim);
  if (s != IBEX_OK) return report(s);
  char* text = nullptr;
  s = ibex_sim_dump_meta(sim, &text);
  if (s == IBEX_OK) {
    if (out.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(out);
      f << text;
      if (!f) {
        std::cerr << "ibexsim: cannot write " << out << '\n';
        s = IBEX_ERR_IO;
      }
    }
  }
  ibex_string_free(text);
  ibex_sim_destroy(sim);
  return s == IBEX_ERR_IO ? 1 : report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ibexsim: compressed CXL memory expander simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ibex_version()));

  Common common;
  std::string out_dir = "out";

  auto* run = app.add_subcommand("run", "replay a trace and write report.json, breakdown.csv, ratio.csv");
  add_common(run, common);
  run->add_option("-o,--out", out_dir, "output directory");

  std::string axis, values;
  auto* sweep = app.add_subcommand("sweep", "run once per value of one config key");
  add_common(sweep, common);
  sweep->add_option("--axis", axis, "config key to vary")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("-o,--out", out_dir, "output directory");

  auto* ablate = app.add_subcommand("ablate", "base, +S, +S+C, +S+C+M on one trace");
  add_common(ablate, common);
  ablate->add_option("-o,--out", out_dir, "output directory");

  std::string trace_out;
  bool binary = false;
  auto* gen = app.add_subcommand("gen-trace", "write the configured trace to a file");
  add_common(gen, common);
  gen->add_option("-o,--out", trace_out, "trace file to write")->required();
  gen->add_flag("--binary", binary, "binary trace format");

  std::string pf_trace, capacity = "0", pf_mode = "both";
  auto* pf = app.add_subcommand("pagefault", "page-fault counts under a resident-memory budget");
  pf->add_option("--trace", pf_trace, "trace file")->required()->check(CLI::ExistingFile);
  pf->add_option("--capacity", capacity, "resident bytes (K/M/G suffixes)")->required();
  pf->add_option("--mode", pf_mode, "ibex, uncompressed or both")
      ->check(CLI::IsMember({"ibex", "uncompressed", "both"}));

  std::string meta_out;
  auto* dump = app.add_subcommand("dump-meta", "run, then print every touched page's metadata entry");
  add_common(dump, common);
  dump->add_option("-o,--out", meta_out, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*run) return cmd_run(common, out_dir);
  if (*dump) return cmd_dump_meta(common, meta_out);

  if (*sweep || *ablate) {
    const auto ov = overrides(common);
    const auto ptrs = cstrs(ov);
    char* json = nullptr;
    ibex_status s;
    if (*sweep) {
      const auto vals = split(values);
      const auto vptrs = cstrs(vals);
      s = ibex_sweep(config_path(common), ptrs.data(), ptrs.size(), axis.c_str(), vptrs.data(), vptrs.size(),
                     out_dir.c_str(), &json);
    } else {
      s = ibex_ablate(config_path(common), ptrs.data(), ptrs.size(), out_dir.c_str(), &json);
    }
    if (s == IBEX_OK) {
      const std::string name = *sweep ? "sweep.json" : "ablation.json";
      std::ofstream f(out_dir + "/" + name);
      f << json;
      std::cout << "combined report in " << out_dir << "/" << name << '\n';
    }
    ibex_string_free(json);
    return report(s);
  }

  if (*gen) {
    const auto ov = overrides(common);
    const auto ptrs = cstrs(ov);
    return report(ibex_gen_trace(config_path(common), ptrs.data(), ptrs.size(), trace_out.c_str(), binary ? 1 : 0));
  }

  if (*pf) {
    std::uint64_t bytes = 0;
    if (const ibex_status s = ibex_parse_size(capacity.c_str(), &bytes); s != IBEX_OK) return report(s);
    for (int mode : {0, 1}) {
      if (pf_mode == "ibex" && mode == 0) continue;
      if (pf_mode == "uncompressed" && mode == 1) continue;
      ibex_pagefault_result r{};
      const ibex_status s = ibex_pagefault(pf_trace.c_str(), bytes, mode, &r);
      if (s != IBEX_OK) return report(s);
      std::cout << (mode ? "ibex" : "uncompressed") << ": accesses " << r.accesses << " cold " << r.cold_faults
                << " capacity " << r.capacity_faults << " peak_resident " << r.resident_bytes_peak << '\n';
    }
    return 0;
  }
  return 0;
}
