#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "reslab/dynamics.hpp"
#include "reslab/escape.hpp"
#include "reslab/gluing.hpp"
#include "reslab/io.hpp"
#include "reslab/profile.hpp"
#include "reslab/resolvent.hpp"

namespace {

using namespace reslab;

struct Common {
  std::string out = ".";
  unsigned long seed = 20260823;
  int threads = 1;
  int verbosity = 1;
};

std::ofstream open_out(const Common& c, const std::string& name) {
  std::string path = c.out + "/" + name;
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open output file: " + path);
  return os;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Profile make_profile(const std::string& kind, std::vector<double> params,
                     double S) {
  return Profile::make(profile_kind_from_string(kind), params, S);
}

io::Header header_for(const std::string& command, const std::string& preset,
                      const Common& c, const std::string& config_text) {
  io::Header hdr;
  hdr.command = command;
  hdr.preset = preset;
  hdr.seed = c.seed;
  hdr.config_hash = io::content_hash(
      config_text.empty() ? command + ":" + preset : config_text);
  return hdr;
}

ExperimentSpec resolve_spec(const std::string& preset_name,
                            const std::string& config_path,
                            const std::string& overrides, const Common& c,
                            std::string* config_text) {
  ExperimentSpec spec = [&] {
    if (!config_path.empty()) {
      *config_text = io::canonical_config(read_file(config_path));
      return io::spec_from_config(*config_text);
    }
    if (preset_name.empty())
      throw std::invalid_argument("either --preset or --config is required");
    *config_text = "preset:" + preset_name;
    return preset(preset_name);
  }();
  if (!overrides.empty()) {
    io::apply_overrides(spec, overrides);
    *config_text += "|" + overrides;
  }
  spec.seed = c.seed;
  return spec;
}

int cmd_preset_list() {
  for (const auto& name : preset_names()) {
    std::cout << name;
    std::string anchor = io::paper_anchor(name);
    if (!anchor.empty()) std::cout << "\t" << anchor;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical resolvent laboratory on surfaces of revolution"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--out", common.out, "output directory");
  app.add_option("--seed", common.seed, "random seed");
  app.add_option("--threads", common.threads, "worker threads");
  app.add_option("-v,--verbosity", common.verbosity, "verbosity");

  // flow
  auto* flow_cmd = app.add_subcommand("flow", "integrate one trajectory");
  std::string profile_kind = "catenoid";
  std::vector<double> profile_params;
  double S = 0.0;
  double s = 1.0, sigma = 0.0, mu = 0.5, T = 50.0, dt = 1e-3;
  flow_cmd->add_option("--profile", profile_kind, "profile kind");
  flow_cmd->add_option("--params", profile_params, "profile parameters")
      ->delimiter(',');
  flow_cmd->add_option("--S", S, "domain half width (0 = default)");
  flow_cmd->add_option("--s", s, "initial s");
  flow_cmd->add_option("--sigma", sigma, "initial sigma");
  flow_cmd->add_option("--mu", mu, "Clairaut invariant");
  flow_cmd->add_option("--T", T, "integration time (negative = backward)");
  flow_cmd->add_option("--dt", dt, "time step");

  // classify
  auto* classify_cmd =
      app.add_subcommand("classify", "closed-orbit census on the shell");
  double E = 1.0;
  classify_cmd->add_option("--profile", profile_kind, "profile kind");
  classify_cmd->add_option("--params", profile_params, "profile parameters")
      ->delimiter(',');
  classify_cmd->add_option("--S", S, "domain half width (0 = default)");
  classify_cmd->add_option("--E", E, "energy shell");

  // escape
  auto* escape_cmd =
      app.add_subcommand("escape", "build and verify an escape function");
  escape_cmd->add_option("--profile", profile_kind, "profile kind");
  escape_cmd->add_option("--params", profile_params, "profile parameters")
      ->delimiter(',');
  escape_cmd->add_option("--S", S, "domain half width (0 = default)");
  escape_cmd->add_option("--E", E, "energy shell");

  // resolve
  auto* resolve_cmd =
      app.add_subcommand("resolve", "truncated resolvent norm at one h");
  std::string preset_name, config_path, overrides;
  double h_single = 0.02;
  resolve_cmd->add_option("--preset", preset_name, "preset name");
  resolve_cmd->add_option("--config", config_path, "JSON config path");
  resolve_cmd->add_option("--set", overrides, "JSON override object");
  resolve_cmd->set_help_flag("--help", "print help");
  resolve_cmd->add_option("--h", h_single, "semiclassical parameter");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "h-sweep with scaling fit");
  bool force = false;
  sweep_cmd->add_option("--preset", preset_name, "preset name");
  sweep_cmd->add_option("--config", config_path, "JSON config path");
  sweep_cmd->add_option("--set", overrides, "JSON override object");
  sweep_cmd->add_flag("--force", force, "run even if hypothesis audits fail");

  // glue
  auto* glue_cmd =
      app.add_subcommand("glue", "parametrix gluing report (double well)");
  double s0 = 2.0, well_depth = 0.1, well_width = 1.0, mu_star = 0.0;
  std::vector<double> glue_h = {0.04, 0.028, 0.02, 0.014, 0.01};
  glue_cmd->add_option("--s0", s0, "well position");
  glue_cmd->add_option("--depth", well_depth, "well depth parameter");
  glue_cmd->add_option("--width", well_width, "well width parameter");
  glue_cmd->add_option("--S", S, "domain half width (0 = default)");
  glue_cmd->add_option("--mu-star", mu_star,
                       "dominant shell mode scale (0 = a(s0))");
  glue_cmd->add_option("--h-list", glue_h, "h values")->delimiter(',');

  app.add_subcommand("preset-list", "list presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("preset-list")) return cmd_preset_list();

    if (app.got_subcommand(flow_cmd)) {
      Profile p = make_profile(profile_kind, profile_params,
                               S > 0 ? S : 8.0);
      Trajectory tr = flow(p, Potential::zero(), {s, sigma, mu}, T, dt);
      auto os = open_out(common, "flow.txt");
      io::write_trajectory(os, tr, header_for("flow", "", common, ""));
      std::cout << "flow: " << tr.samples.size() << " samples, drift "
                << io::format_double(tr.energy_drift) << "\n";
      return 0;
    }

    if (app.got_subcommand(classify_cmd)) {
      Profile p = make_profile(profile_kind, profile_params,
                               S > 0 ? S : 8.0);
      auto orbits = classify_orbits(p, Potential::zero(), E);
      auto os = open_out(common, "census.txt");
      io::write_census(os, orbits, header_for("classify", "", common, ""));
      std::cout << "census: " << orbits.size() << " closed orbits\n";
      return 0;
    }

    if (app.got_subcommand(escape_cmd)) {
      Profile p = make_profile(profile_kind, profile_params,
                               S > 0 ? S : 8.0);
      auto orbits = classify_orbits(p, Potential::zero(), E);
      bool all_pass = true;
      int built = 0;
      for (const auto& orbit : orbits) {
        if (orbit.stability != Stability::hyperbolic || orbit.mu <= 0)
          continue;
        EscapeFunction q = build_escape_function(
            p, Potential::zero(), orbit, io::standard_escape_regions(orbit));
        EscapeVerification ver = verify_escape_function(q);
        auto os = open_out(common,
                           "escape_" + std::to_string(built) + ".txt");
        io::write_escape_report(os, q, ver,
                                header_for("escape", "", common, ""));
        all_pass = all_pass && ver.pass;
        ++built;
      }
      if (built == 0) {
        std::cerr << "no hyperbolic orbit to build an escape function on\n";
        return 1;
      }
      std::cout << "escape: " << built << " function(s), "
                << (all_pass ? "all clauses pass" : "verification FAILED")
                << "\n";
      return all_pass ? 0 : 1;
    }

    if (app.got_subcommand(resolve_cmd)) {
      std::string config_text;
      ExperimentSpec spec =
          resolve_spec(preset_name, config_path, overrides, common,
                       &config_text);
      NormAtH row = resolvent_norm(spec, h_single, common.threads);
      auto os = open_out(common, "resolve_" + spec.name + ".txt");
      io::write_norm_row(os, row,
                         header_for("resolve", preset_name, common,
                                    config_text));
      std::cout << "norm " << io::format_double(row.norm) << " at m* "
                << row.m_star << "\n";
      return row.all_converged && row.sentinels_ok ? 0 : 1;
    }

    if (app.got_subcommand(sweep_cmd)) {
      std::string config_text;
      ExperimentSpec spec =
          resolve_spec(preset_name, config_path, overrides, common,
                       &config_text);
      SweepResult res = run_sweep(spec, common.threads, force);
      io::Header hdr = header_for("sweep", preset_name, common, config_text);
      {
        auto os = open_out(common, "sweep_" + spec.name + ".txt");
        io::write_sweep(os, res, hdr);
      }
      {
        auto os = open_out(common, "sweep_" + spec.name + "_xy.txt");
        io::write_sweep_xy(os, res, hdr);
      }
      bool ok = res.audits_pass && res.fit_ok;
      for (const auto& r : res.rows)
        ok = ok && r.error.empty() && r.all_converged;
      if (res.fit_ok)
        std::cout << "alpha " << io::format_double(res.fit.alpha_for(res.prediction))
                  << " beta " << io::format_double(res.fit.beta) << "\n";
      return ok ? 0 : 1;
    }

    if (app.got_subcommand(glue_cmd)) {
      Profile p = make_profile("double_well", {s0, well_depth, well_width},
                               S > 0 ? S : 4.5);
      if (mu_star == 0.0) mu_star = p.a(s0);
      GluingReport rep = verify_gluing(p, Potential::zero(), glue_h,
                                       {0.0, 0.0}, mu_star, common.seed);
      auto os = open_out(common, "glue.txt");
      io::write_gluing(os, rep, header_for("glue", "gluing", common, ""));
      bool ok = true;
      for (const auto& r : rep.rows)
        ok = ok && r.error.empty() && r.exact_identity_rel <= 1e-10 &&
             r.iterated_identity_rel <= 1e-10;
      std::cout << "gluing: " << rep.rows.size() << " rows, exact algebra "
                << (ok ? "holds" : "FAILED") << "\n";
      return ok ? 0 : 1;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
