#include "reslab/io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <stdexcept>

#include "json.hpp"

#include "reslab/bump.hpp"

namespace reslab::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string paper_anchor(const std::string& preset) {
  if (preset == "nontrapping") return "Theorem 2";
  if (preset == "annulus") return "Theorem 1";
  if (preset == "catenoid_full") return "§1 example";
  if (preset == "catenoid_thm1") return "Theorem 1";
  if (preset == "prop53") return "Prop 5.3";
  if (preset == "lemma52_full") return "Lemma 5.2";
  if (preset == "elliptic_blowup") return "§1 example";
  if (preset == "gluing") return "Lemma 5.2";
  return "";
}

std::string content_hash(const std::string& canonical) {
  unsigned long long hash = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", hash);
  return buf;
}

void write_header(std::ostream& os, const Header& hdr) {
  os << "# artifact " << kArtifactVersion << " schema " << kSchemaVersion
     << "\n";
  os << "# command " << hdr.command << "\n";
  if (!hdr.preset.empty()) {
    os << "# preset " << hdr.preset;
    std::string anchor = paper_anchor(hdr.preset);
    if (!anchor.empty()) os << " (" << anchor << ")";
    os << "\n";
  }
  os << "# config " << (hdr.config_hash.empty() ? "-" : hdr.config_hash)
     << " seed " << hdr.seed << "\n";
  if (hdr.timestamp) {
    std::time_t t = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    os << "# generated " << buf << "\n";
  }
}

namespace {

double erf_edge(double x, double delta) {
  return 0.5 * std::erfc(-x / (std::sqrt(2.0) * delta));
}

std::vector<double> need_array(const json& j, const std::string& key,
                               size_t len) {
  if (!j.contains(key))
    throw std::invalid_argument("config missing key: " + key);
  auto v = j.at(key).get<std::vector<double>>();
  if (len && v.size() != len)
    throw std::invalid_argument("config key has wrong length: " + key);
  return v;
}

CutoffSpec cutoff_from_json(const json& j, const std::string& label) {
  if (!j.is_object())
    throw std::invalid_argument("config missing cutoff object: " + label);
  auto w = need_array(j, "s_window", 4);
  CutoffSpec c;
  c.s_lo = w[0];
  c.s_hi = w[3];
  auto spatial = [w](double s) {
    return plateau_bump(s, w[0], w[1], w[2], w[3]);
  };
  if (j.contains("sigma_erf")) {
    auto e = need_array(j, "sigma_erf", 4);
    double lo = e[0], lod = e[1], hi = e[2], hid = e[3];
    double sig_lo = lo - 8 * lod, sig_hi = hi + 8 * hid;
    if (j.contains("sigma_range")) {
      auto r = need_array(j, "sigma_range", 2);
      sig_lo = r[0];
      sig_hi = r[1];
    }
    c.a = SymbolXS::product(
        spatial,
        [=](double sig) {
          return erf_edge(sig - lo, lod) * erf_edge(hi - sig, hid);
        },
        sig_lo, sig_hi);
  } else {
    c.a = SymbolXS::spatial(spatial);
  }
  if (j.contains("b_window")) {
    auto b = need_array(j, "b_window", 4);
    c.b = [b](double mu) { return plateau_bump(mu, b[0], b[1], b[2], b[3]); };
  }
  c.description = j.value("description", label);
  return c;
}

Prediction prediction_from_string(const std::string& s) {
  for (Prediction p :
       {Prediction::nontrapping_h_inv, Prediction::log_loss,
        Prediction::log2_loss, Prediction::microlocal_h_inv,
        Prediction::elliptic_blowup})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("config: unknown prediction: " + s);
}

LambdaKind lambda_from_string(const std::string& s) {
  for (LambdaKind k : {LambdaKind::zero, LambdaKind::im_h4,
                       LambdaKind::eigenvalue_target})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("config: unknown lambda kind: " + s);
}

}  // namespace

ExperimentSpec spec_from_config(const std::string& json_text) {
  json j = json::parse(json_text);
  if (!j.contains("profile"))
    throw std::invalid_argument("config missing key: profile");
  const json& jp = j.at("profile");
  if (!jp.contains("kind"))
    throw std::invalid_argument("config missing key: profile.kind");
  Profile profile = Profile::make(
      profile_kind_from_string(jp.at("kind").get<std::string>()),
      jp.value("params", std::vector<double>{}), jp.value("S", 8.0));

  ExperimentSpec spec{.name = j.value("name", std::string("custom")),
                      .profile = std::move(profile),
                      .potential = Potential::zero()};
  spec.E = j.value("E", 1.0);
  if (j.contains("barrier_s0"))
    spec.barrier = BarrierSpec::standard(j.at("barrier_s0").get<double>());
  if (!j.contains("A")) throw std::invalid_argument("config missing key: A");
  spec.A = cutoff_from_json(j.at("A"), "A");
  spec.B = j.contains("B") ? cutoff_from_json(j.at("B"), "B") : spec.A;
  spec.h_list = need_array(j, "h_list", 0);
  if (j.contains("lambda"))
    spec.lambda_kind = lambda_from_string(j.at("lambda").get<std::string>());
  if (j.contains("modes")) {
    const json& jm = j.at("modes");
    std::string kind = jm.value("kind", std::string("active_shell"));
    if (kind == "active_shell")
      spec.modes.kind = ModePolicy::Kind::active_shell;
    else if (kind == "window")
      spec.modes.kind = ModePolicy::Kind::window;
    else if (kind == "explicit")
      spec.modes.kind = ModePolicy::Kind::explicit_list;
    else
      throw std::invalid_argument("config: unknown mode policy: " + kind);
    spec.modes.margin = jm.value("margin", 0.5);
    spec.modes.center = jm.value("center", 0.0);
    spec.modes.halfwidth = jm.value("halfwidth", 0.0);
    spec.modes.modes = jm.value("list", std::vector<int>{});
    spec.modes.sentinels = jm.value("sentinels", 3);
  }
  if (j.contains("prediction"))
    spec.prediction =
        prediction_from_string(j.at("prediction").get<std::string>());
  if (j.contains("absorber")) {
    spec.absorber.frac = j.at("absorber").value("frac", 0.15);
    spec.absorber.strength = j.at("absorber").value("strength", 1.0);
  }
  spec.pts_per_h = j.value("pts_per_h", 8.0);
  spec.power_tol = j.value("power_tol", 1e-3);
  spec.max_power_iter = j.value("max_power_iter", 3000);
  spec.seed = j.value("seed", 20260823UL);
  return spec;
}

std::string canonical_config(const std::string& json_text) {
  return json::parse(json_text).dump(2);
}

void apply_overrides(ExperimentSpec& spec, const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.contains("h_list"))
    spec.h_list = j.at("h_list").get<std::vector<double>>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<unsigned long>();
  if (j.contains("power_tol"))
    spec.power_tol = j.at("power_tol").get<double>();
  if (j.contains("max_power_iter"))
    spec.max_power_iter = j.at("max_power_iter").get<int>();
  if (j.contains("pts_per_h")) spec.pts_per_h = j.at("pts_per_h").get<double>();
}

void write_norm_row(std::ostream& os, const NormAtH& row, const Header& hdr) {
  write_header(os, hdr);
  os << "h norm m_star iterations max_residual converged sentinels_ok\n";
  os << format_double(row.h) << " " << format_double(row.norm) << " "
     << row.m_star << " " << row.iterations << " "
     << format_double(row.max_solve_residual) << " "
     << (row.all_converged ? 1 : 0) << " " << (row.sentinels_ok ? 1 : 0)
     << "\n";
  os << "# modes\n";
  os << "m base_norm norm iterations converged residual\n";
  for (const auto& mr : row.modes)
    os << mr.m << " " << format_double(mr.base_norm) << " "
       << format_double(mr.norm) << " " << mr.iterations << " "
       << (mr.converged ? 1 : 0) << " " << format_double(mr.solve_residual)
       << "\n";
}

void write_sweep(std::ostream& os, const SweepResult& res, const Header& hdr) {
  write_header(os, hdr);
  os << "name " << res.name << "\n";
  os << "prediction " << to_string(res.prediction) << "\n";
  os << "# audits\n";
  for (const auto& a : res.audits)
    os << a.name << " " << (a.pass ? "pass" : "FAIL") << " : " << a.detail
       << "\n";
  os << "# rows\n";
  os << "h norm m_star iterations max_residual converged sentinels_ok error\n";
  for (const auto& r : res.rows)
    os << format_double(r.h) << " " << format_double(r.norm) << " " << r.m_star
       << " " << r.iterations << " " << format_double(r.max_solve_residual)
       << " " << (r.all_converged ? 1 : 0) << " " << (r.sentinels_ok ? 1 : 0)
       << " " << (r.error.empty() ? "-" : r.error) << "\n";
  os << "# fit\n";
  if (res.fit_ok) {
    os << "alpha " << format_double(res.fit.alpha) << "\n";
    os << "beta " << format_double(res.fit.beta) << "\n";
    os << "c " << format_double(res.fit.c) << "\n";
    os << "residual " << format_double(res.fit.residual) << "\n";
    os << "alpha_pure " << format_double(res.fit.alpha_pure) << "\n";
    os << "c_pure " << format_double(res.fit.c_pure) << "\n";
    os << "residual_pure " << format_double(res.fit.residual_pure) << "\n";
    os << "alpha_reported " << format_double(res.fit.alpha_for(res.prediction))
       << "\n";
  } else {
    os << "fit_error " << res.fit_error << "\n";
  }
}

void write_sweep_xy(std::ostream& os, const SweepResult& res,
                    const Header& hdr) {
  write_header(os, hdr);
  os << "log10_inv_h log10_norm\n";
  for (const auto& r : res.rows) {
    if (!r.error.empty() || r.norm <= 0) continue;
    os << format_double(std::log10(1.0 / r.h)) << " "
       << format_double(std::log10(r.norm)) << "\n";
  }
}

void write_gluing(std::ostream& os, const GluingReport& rep,
                  const Header& hdr) {
  write_header(os, hdr);
  os << "h m exact_identity iterated_identity A0sq A1sq A0 A1 A0A1 "
        "A1A0A1A0chi A0A1A0A1 parametrix direct discrepancy error\n";
  for (const auto& r : rep.rows)
    os << format_double(r.h) << " " << r.m << " "
       << format_double(r.exact_identity_rel) << " "
       << format_double(r.iterated_identity_rel) << " "
       << format_double(r.norm_A0_sq) << " " << format_double(r.norm_A1_sq)
       << " " << format_double(r.norm_A0) << " " << format_double(r.norm_A1)
       << " " << format_double(r.norm_A0A1) << " "
       << format_double(r.norm_A1A0A1A0_chi) << " "
       << format_double(r.norm_A0A1A0A1) << " "
       << format_double(r.parametrix_norm) << " "
       << format_double(r.direct_norm) << " " << format_double(r.discrepancy)
       << " " << (r.error.empty() ? "-" : r.error) << "\n";
  os << "# decay fits (norm ~ C h^k)\n";
  if (rep.fits_ok) {
    os << "decay_A0A1 " << format_double(rep.decay_A0A1) << "\n";
    os << "decay_iterated " << format_double(rep.decay_iterated) << "\n";
  } else {
    os << "decay fits unavailable\n";
  }
}

void write_trajectory(std::ostream& os, const Trajectory& tr,
                      const Header& hdr) {
  write_header(os, hdr);
  os << "mu " << format_double(tr.mu) << " energy_drift "
     << format_double(tr.energy_drift) << " exit "
     << (tr.exit_reason == ExitReason::left_domain ? "left_domain" : "horizon")
     << "\n";
  os << "t s sigma\n";
  for (const auto& smp : tr.samples)
    os << format_double(smp.t) << " " << format_double(smp.s) << " "
       << format_double(smp.sigma) << "\n";
}

void write_census(std::ostream& os, const std::vector<ClosedOrbit>& orbits,
                  const Header& hdr) {
  write_header(os, hdr);
  os << "s_star mu E stability\n";
  for (const auto& o : orbits)
    os << format_double(o.s_star) << " " << format_double(o.mu) << " "
       << format_double(o.E) << " " << to_string(o.stability) << "\n";
}

void write_escape_report(std::ostream& os, const EscapeFunction& q,
                         const EscapeVerification& ver, const Header& hdr) {
  write_header(os, hdr);
  os << "orbit s_star " << format_double(q.orbit().s_star) << " mu "
     << format_double(q.orbit().mu) << " "
     << to_string(q.orbit().stability) << "\n";
  os << "tubes " << q.seed_count() << "\n";
  os << "max_Hpq_on_flowout " << format_double(ver.max_Hpq_on_flowout) << "\n";
  os << "c_min " << format_double(ver.c_min) << "\n";
  os << "sup_q_err_near_gamma " << format_double(ver.sup_q_err_near_gamma)
     << "\n";
  os << "sup_q_outside_U " << format_double(ver.sup_q_outside_U) << "\n";
  os << "q_tilde_floor " << format_double(ver.q_tilde_floor) << "\n";
  os << "q_range " << format_double(ver.q_grid_min) << " "
     << format_double(ver.q_grid_max) << "\n";
  os << "max_sqrt_q_grad " << format_double(ver.max_sqrt_q_grad) << "\n";
  os << "max_sqrt_negHpq_grad " << format_double(ver.max_sqrt_negHpq_grad)
     << "\n";
  os << "monotone_along_flow " << (ver.monotone_along_flow ? 1 : 0) << "\n";
  os << "pass " << (ver.pass ? 1 : 0) << "\n";
  for (const auto& f : ver.failures) os << "failure " << f << "\n";
  auto grid = q.grid();
  os << "# q grid " << grid.n << " x " << grid.n << " on ["
     << format_double(grid.s_lo) << "," << format_double(grid.s_hi) << "] x ["
     << format_double(grid.sig_lo) << "," << format_double(grid.sig_hi)
     << "]\n";
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j)
      os << format_double(grid.q[static_cast<size_t>(i) * grid.n + j])
         << (j + 1 == grid.n ? '\n' : ' ');
  }
}

EscapeRegions standard_escape_regions(const ClosedOrbit& orbit) {
  return EscapeRegions::boxes(orbit.s_star, 0.10, 0.18, 0.28, 0.40, 0.55);
}

}  // namespace reslab::io
