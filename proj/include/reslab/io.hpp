#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "reslab/dynamics.hpp"
#include "reslab/escape.hpp"
#include "reslab/gluing.hpp"
#include "reslab/resolvent.hpp"

namespace reslab::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

/// Reference tag carried in output files for each preset.
std::string paper_anchor(const std::string& preset);

/// FNV-1a hash of a canonical string, hex encoded.
std::string content_hash(const std::string& canonical);

struct Header {
  std::string command;
  std::string preset;       // empty for ad hoc runs
  std::string config_hash;  // hash of the effective config
  unsigned long seed = 0;
  bool timestamp = true;    // emit a "# generated" line (ignored by diffs)
};

void write_header(std::ostream& os, const Header& hdr);

/// Builds a custom experiment from a JSON config (plateau-window cutoffs,
/// erf sigma factors; audit hooks are attached by the preset table and are
/// not part of the config schema).  Throws std::invalid_argument naming the
/// offending key.
ExperimentSpec spec_from_config(const std::string& json_text);

/// Parses and re-serializes a config canonically (sorted keys, fixed
/// number formatting); parse-dump round-trips to a fixed point.
std::string canonical_config(const std::string& json_text);

/// Applies overrides ("h_list", "seed", "power_tol", "max_power_iter",
/// "pts_per_h") from a JSON object string onto a spec.
void apply_overrides(ExperimentSpec& spec, const std::string& json_text);

void write_sweep(std::ostream& os, const SweepResult& res, const Header& hdr);
/// Plot-ready columns log10(1/h), log10(norm).
void write_sweep_xy(std::ostream& os, const SweepResult& res,
                    const Header& hdr);
void write_norm_row(std::ostream& os, const NormAtH& row, const Header& hdr);
void write_gluing(std::ostream& os, const GluingReport& rep,
                  const Header& hdr);
void write_trajectory(std::ostream& os, const Trajectory& tr,
                      const Header& hdr);
void write_census(std::ostream& os, const std::vector<ClosedOrbit>& orbits,
                  const Header& hdr);
void write_escape_report(std::ostream& os, const EscapeFunction& q,
                         const EscapeVerification& ver, const Header& hdr);

/// Nested boxes used by the default escape-function runs on a neck orbit.
EscapeRegions standard_escape_regions(const ClosedOrbit& orbit);

std::string format_double(double v);

}  // namespace reslab::io
