// Acceptance gate: one numbered check per invocation, one PASS/FAIL line
// each, exit status 0 only on PASS.  Usage: acceptance <1..9> [cli-path]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "reslab/bump.hpp"
#include "reslab/dynamics.hpp"
#include "reslab/escape.hpp"
#include "reslab/gluing.hpp"
#include "reslab/io.hpp"
#include "reslab/profile.hpp"
#include "reslab/resolvent.hpp"

using namespace reslab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) {
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

Eigen::MatrixXcd dense_of(const LinOp& M) {
  Eigen::MatrixXcd D(M.n, M.n);
  cvec e(M.n, {0.0, 0.0}), col;
  for (int j = 0; j < M.n; ++j) {
    e[j] = 1.0;
    M.apply(e, col);
    for (int i = 0; i < M.n; ++i) D(i, j) = col[i];
    e[j] = 0.0;
  }
  return D;
}

// 1. Truncated mode-resolvent norms against dense singular values.
Check criterion_norm_oracle() {
  Check c;
  auto t0 = Clock::now();
  std::vector<Profile> profiles;
  profiles.push_back(Profile::make(ProfileKind::catenoid, {}, 1.5));
  profiles.push_back(
      Profile::make(ProfileKind::nontrapping_monotone, {1.0, 0.25}, 1.5));
  profiles.push_back(
      Profile::make(ProfileKind::double_well, {0.7, 0.1, 0.5}, 1.5));
  Potential V = Potential::zero();
  double worst = 0.0;
  int count = 0;
  for (size_t ip = 0; ip < profiles.size() && count < 50; ++ip) {
    for (double h : {0.08, 0.1, 0.12}) {
      Grid1D g = Grid1D::make(1.5, h);
      if (g.n > 400) {
        c.require(false, "grid larger than 400 nodes");
        return c;
      }
      AbsorberSpec ab;
      SymbolXS a_sym =
          count % 2 == 0
              ? SymbolXS::spatial([](double s) {
                  return plateau_bump(s, -1.0, -0.6, 0.6, 1.0);
                })
              : SymbolXS::product(
                    [](double s) { return plateau_bump(s, -1.0, -0.6, 0.6, 1.0); },
                    [](double sig) {
                      return plateau_bump(sig, -1.3, -0.9, 0.9, 1.3);
                    },
                    -1.4, 1.4);
      CutoffOperator A(a_sym, nullptr, h, g);
      CutoffOperator B(SymbolXS::spatial([](double s) {
                         return plateau_bump(s, -0.8, -0.5, 0.4, 0.7);
                       }),
                       nullptr, h, g);
      for (int m : {0, 2, 5, 8, 11, 14}) {
        if (count >= 50) break;
        cplx lambda = (m % 3 == 0) ? cplx{0.0, 0.0} : cplx{0.1, 0.02};
        ModeOperator op =
            build_mode_operator(profiles[ip], V, h, m, lambda, g, &ab);
        BandedLU lu(op.mat);
        ModeNorm mn = mode_resolvent_norm(A.base_op(), lu, op.mat,
                                          B.base_op(), 1e-8, 50000,
                                          1000 + count);
        Eigen::MatrixXcd DP = dense_of(LinOp::from_banded(&op.mat));
        Eigen::MatrixXcd M =
            dense_of(A.base_op()) * DP.inverse() * dense_of(B.base_op());
        double svd = Eigen::BDCSVD<Eigen::MatrixXcd>(M).singularValues()(0);
        double rel = std::abs(mn.norm - svd) / svd;
        worst = std::max(worst, rel);
        c.require(mn.converged, "power iteration did not converge");
        ++count;
      }
    }
  }
  double dt = seconds_since(t0);
  c.require(count == 50, "expected 50 instances, ran " + std::to_string(count));
  c.require(worst <= 1e-6,
            "worst relative deviation " + io::format_double(worst));
  c.require(dt < 10.0, "took " + io::format_double(dt) + "s (limit 10)");
  c.note("50 instances, worst deviation " + io::format_double(worst) + ", " +
         io::format_double(dt) + "s");
  return c;
}

// 2. Flow accuracy and the latitude-orbit censuses.
Check criterion_dynamics() {
  Check c;
  auto t0 = Clock::now();
  Potential V = Potential::zero();

  Profile dw = Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.5}, 8.0);
  Profile cat = Profile::make(ProfileKind::catenoid, {}, 8.0);
  double worst_drift = 0.0;
  for (const Profile* p : {&dw, &cat})
    for (PhasePoint pt : {PhasePoint{0.2, 0.3, 1.0}, PhasePoint{1.1, -0.2, 0.8},
                          PhasePoint{-0.5, 0.05, 1.9}})
      for (double T : {50.0, -50.0}) {
        Trajectory tr = flow(*p, V, pt, T, 1e-3, {1e-6, 100.0, 8});
        worst_drift = std::max(worst_drift, tr.energy_drift);
      }
  c.require(worst_drift <= 1e-8,
            "energy drift " + io::format_double(worst_drift));

  auto dworbits = classify_orbits(dw, V, 1.0);
  int ell = 0, hyp = 0;
  for (const auto& o : dworbits) {
    ell += o.stability == Stability::elliptic;
    hyp += o.stability == Stability::hyperbolic;
  }
  c.require(ell == 2 && hyp == 4,
            "double well census " + std::to_string(ell) + " elliptic, " +
                std::to_string(hyp) + " hyperbolic (want 2 + 4)");

  auto catorbits = classify_orbits(cat, V, 1.0);
  bool cat_ok = catorbits.size() == 2;
  for (const auto& o : catorbits)
    cat_ok = cat_ok && o.stability == Stability::hyperbolic;
  c.require(cat_ok, "catenoid census is not two hyperbolic orbits");

  double dt = seconds_since(t0);
  c.require(dt < 30.0, "took " + io::format_double(dt) + "s (limit 30)");
  c.note("drift " + io::format_double(worst_drift) + ", censuses 2+4 and 2, " +
         io::format_double(dt) + "s");
  return c;
}

// 3. Escape function construction and verification on the catenoid neck.
Check criterion_escape() {
  Check c;
  auto t0 = Clock::now();
  Profile p = Profile::make(ProfileKind::catenoid, {}, 8.0);
  auto orbits = classify_orbits(p, Potential::zero(), 1.0);
  const ClosedOrbit* neck = nullptr;
  for (const auto& o : orbits)
    if (o.stability == Stability::hyperbolic && o.mu > 0) neck = &o;
  c.require(neck != nullptr, "no hyperbolic orbit found");
  if (!neck) return c;
  EscapeFunction q = build_escape_function(
      p, Potential::zero(), *neck, io::standard_escape_regions(*neck));
  EscapeVerification ver = verify_escape_function(q);
  for (const auto& f : ver.failures) c.require(false, f);
  c.require(ver.pass, "verification flag");
  double dt = seconds_since(t0);
  c.require(dt < 60.0, "took " + io::format_double(dt) + "s (limit 60)");
  c.note("c_min " + io::format_double(ver.c_min) + ", flowout residual " +
         io::format_double(ver.max_Hpq_on_flowout) + ", " +
         io::format_double(dt) + "s");
  return c;
}

// 4. Nontrapping scaling and grid-refinement stability.
Check criterion_nontrapping() {
  Check c;
  ExperimentSpec spec = preset("nontrapping");
  SweepResult res = run_sweep(spec);
  c.require(res.audits_pass, "hypothesis audits");
  c.require(res.fit_ok, "fit failed: " + res.fit_error);
  double alpha = res.fit.alpha_for(res.prediction);
  c.require(alpha >= 0.85 && alpha <= 1.15,
            "alpha " + io::format_double(alpha) + " outside [0.85, 1.15]");
  for (const auto& r : res.rows)
    c.require(r.error.empty() && r.all_converged && r.sentinels_ok,
              "row h=" + io::format_double(r.h) + " unhealthy");

  double h0 = spec.h_list.front();
  NormAtH coarse = resolvent_norm(spec, h0);
  ExperimentSpec fine = spec;
  fine.pts_per_h = 16.0;
  NormAtH refined = resolvent_norm(fine, h0);
  double change = std::abs(refined.norm - coarse.norm) / coarse.norm;
  c.require(change <= 0.02,
            "grid halving changed the norm by " + io::format_double(change));
  c.note("alpha " + io::format_double(alpha) + ", refinement change " +
         io::format_double(change));
  return c;
}

// 5. Microlocally truncated catenoid scaling and the gap to the full cutoff.
Check criterion_catenoid() {
  Check c;
  SweepResult micro = run_sweep(preset("catenoid_thm1"));
  c.require(micro.audits_pass, "catenoid_thm1 audits");
  c.require(micro.fit_ok, "catenoid_thm1 fit: " + micro.fit_error);
  double alpha = micro.fit.alpha_for(micro.prediction);
  c.require(alpha <= 1.15, "alpha " + io::format_double(alpha) + " > 1.15");
  for (const auto& r : micro.rows)
    c.require(r.error.empty() && r.all_converged && r.sentinels_ok,
              "micro row h=" + io::format_double(r.h) + " unhealthy");

  SweepResult full = run_sweep(preset("catenoid_full"));
  c.require(full.rows.size() == micro.rows.size(), "row count mismatch");
  bool increasing = true;
  std::string ratios;
  for (size_t k = 0; k < std::min(full.rows.size(), micro.rows.size()); ++k) {
    double ratio = full.rows[k].norm / micro.rows[k].norm;
    if (k > 0 &&
        ratio <= full.rows[k - 1].norm / micro.rows[k - 1].norm)
      increasing = false;
    ratios += (k ? " " : "") + io::format_double(ratio);
  }
  c.require(increasing,
            "full/micro ratio not strictly increasing: " + ratios);
  c.note("alpha " + io::format_double(alpha) + ", ratios " + ratios);
  return c;
}

// 6. Barrier-absorbed double-well scalings.
Check criterion_barrier_scalings() {
  Check c;
  SweepResult prop = run_sweep(preset("prop53"));
  c.require(prop.audits_pass, "prop53 audits");
  c.require(prop.fit_ok, "prop53 fit: " + prop.fit_error);
  double a_prop = prop.fit.alpha_for(prop.prediction);
  c.require(a_prop <= 1.15,
            "prop53 alpha " + io::format_double(a_prop) + " > 1.15");
  for (const auto& r : prop.rows)
    c.require(r.error.empty() && r.all_converged && r.sentinels_ok,
              "prop53 row h=" + io::format_double(r.h) + " unhealthy");

  SweepResult lem = run_sweep(preset("lemma52_full"));
  c.require(lem.audits_pass, "lemma52_full audits");
  c.require(lem.fit_ok, "lemma52_full fit: " + lem.fit_error);
  double a_lem = lem.fit.alpha_for(lem.prediction);
  c.require(a_lem <= 1.15,
            "lemma52_full alpha " + io::format_double(a_lem) + " > 1.15");
  c.require(lem.fit.beta <= 2.5,
            "lemma52_full beta " + io::format_double(lem.fit.beta) + " > 2.5");
  for (const auto& r : lem.rows)
    c.require(r.error.empty() && r.all_converged && r.sentinels_ok,
              "lemma52_full row h=" + io::format_double(r.h) + " unhealthy");
  c.note("prop53 alpha " + io::format_double(a_prop) + ", lemma52_full alpha " +
         io::format_double(a_lem) + " beta " + io::format_double(lem.fit.beta));
  return c;
}

// 7. Elliptic trapping defeats every polynomial resolvent bound candidate.
Check criterion_elliptic_blowup() {
  Check c;
  SweepResult res = run_sweep(preset("elliptic_blowup"));
  c.require(res.audits_pass, "audits");
  const NormAtH* last = nullptr;
  for (const auto& r : res.rows) {
    c.require(r.error.empty() && r.all_converged,
              "row h=" + io::format_double(r.h) + " unhealthy");
    last = &r;
  }
  if (last) {
    double bound = std::pow(last->h, -3.0);
    c.require(last->norm > bound,
              "norm " + io::format_double(last->norm) + " at h=" +
                  io::format_double(last->h) + " not above h^-3 = " +
                  io::format_double(bound));
    c.note("norm " + io::format_double(last->norm) + " vs h^-3 = " +
           io::format_double(bound));
  } else {
    c.require(false, "no rows");
  }
  return c;
}

// 8. Parametrix gluing: exact algebra, remainder decay, norm agreement.
Check criterion_gluing() {
  Check c;
  Profile p = Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.0}, 4.5);
  GluingReport rep = verify_gluing(p, Potential::zero(),
                                   {0.04, 0.028, 0.02, 0.014, 0.01},
                                   {0.0, 0.0}, p.a(2.0));
  for (const auto& r : rep.rows) {
    c.require(r.error.empty(), "row h=" + io::format_double(r.h) + ": " +
                                   r.error);
    c.require(r.exact_identity_rel <= 1e-10,
              "exact identity residual " +
                  io::format_double(r.exact_identity_rel) + " at h=" +
                  io::format_double(r.h));
    c.require(r.iterated_identity_rel <= 1e-10,
              "iterated identity residual " +
                  io::format_double(r.iterated_identity_rel) + " at h=" +
                  io::format_double(r.h));
    c.require(r.discrepancy <= 0.05,
              "parametrix vs direct norm differ by " +
                  io::format_double(r.discrepancy) + " at h=" +
                  io::format_double(r.h));
  }
  c.require(rep.fits_ok, "decay fits unavailable");
  c.require(rep.decay_A0A1 >= 3.0,
            "cross remainder decay exponent " +
                io::format_double(rep.decay_A0A1) + " < 3");
  c.note("decay A0A1 " + io::format_double(rep.decay_A0A1) + ", iterated " +
         io::format_double(rep.decay_iterated));
  return c;
}

// 9. Bitwise reproducibility of the command line outputs.
Check criterion_determinism(const std::string& cli) {
  Check c;
  if (cli.empty()) {
    c.require(false, "cli path not supplied");
    return c;
  }
  auto run = [&](const std::string& dir, int threads) {
    std::string cmd = "mkdir -p " + dir + " && " + cli + " --out " + dir +
                      " --seed 99 --threads " + std::to_string(threads) +
                      " resolve --preset nontrapping --h 0.05 > /dev/null";
    return std::system(cmd.c_str()) == 0;
  };
  auto slurp_stable = [](const std::string& path) {
    std::ifstream is(path);
    std::ostringstream out;
    std::string line;
    while (std::getline(is, line))
      if (line.rfind("# generated", 0) != 0) out << line << "\n";
    return out.str();
  };
  std::string base = "/tmp/reslab_acceptance9";
  c.require(run(base + "/a", 1), "first run failed");
  c.require(run(base + "/b", 1), "second run failed");
  c.require(run(base + "/c", 3), "threaded run failed");
  std::string fa = slurp_stable(base + "/a/resolve_nontrapping.txt");
  std::string fb = slurp_stable(base + "/b/resolve_nontrapping.txt");
  std::string fc = slurp_stable(base + "/c/resolve_nontrapping.txt");
  c.require(!fa.empty(), "no output produced");
  c.require(fa == fb, "repeat run differs byte for byte");
  c.require(fa == fc, "output depends on the thread count");
  c.note("3 runs identical modulo timestamp");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <1..9> [cli-path]\n";
    return 2;
  }
  int which = std::atoi(argv[1]);
  std::string cli = argc > 2 ? argv[2] : "";
  Check c;
  std::string name;
  try {
    switch (which) {
      case 1: name = "norm oracle"; c = criterion_norm_oracle(); break;
      case 2: name = "dynamics"; c = criterion_dynamics(); break;
      case 3: name = "escape function"; c = criterion_escape(); break;
      case 4: name = "nontrapping scaling"; c = criterion_nontrapping(); break;
      case 5: name = "catenoid scaling"; c = criterion_catenoid(); break;
      case 6: name = "barrier scalings"; c = criterion_barrier_scalings(); break;
      case 7: name = "elliptic blowup"; c = criterion_elliptic_blowup(); break;
      case 8: name = "gluing"; c = criterion_gluing(); break;
      case 9: name = "determinism"; c = criterion_determinism(cli); break;
      default:
        std::cerr << "unknown criterion " << which << "\n";
        return 2;
    }
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  std::printf("criterion %d (%s): %s%s%s\n", which, name.c_str(),
              c.ok ? "PASS" : "FAIL", c.detail.empty() ? "" : " - ",
              c.detail.c_str());
  return c.ok ? 0 : 1;
}
