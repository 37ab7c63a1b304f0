#include <sstream>

#include "doctest.h"
#include "reslab/io.hpp"

using namespace reslab;

namespace {

const char* kMinimalConfig = R"({
  "name": "tiny",
  "profile": {"kind": "catenoid", "S": 3.0},
  "A": {"s_window": [-1.0, -0.5, 0.5, 1.0]},
  "h_list": [0.1, 0.05, 0.025, 0.0125]
})";

}  // namespace

TEST_CASE("configs parse into experiments") {
  ExperimentSpec spec = io::spec_from_config(kMinimalConfig);
  CHECK(spec.name == "tiny");
  CHECK(spec.profile.kind() == ProfileKind::catenoid);
  CHECK(spec.profile.domain_half_width() == 3.0);
  CHECK(spec.E == 1.0);
  CHECK_FALSE(spec.barrier.has_value());
  CHECK(spec.A.s_lo == -1.0);
  CHECK(spec.A.s_hi == 1.0);
  CHECK(spec.A.a(0.0, 0.3) == doctest::Approx(1.0));
  CHECK(spec.A.a(0.9999, 0.0) < 1e-6);
  CHECK(spec.B.s_lo == spec.A.s_lo);  // B defaults to A
  CHECK(spec.h_list.size() == 4);
  CHECK(spec.modes.kind == ModePolicy::Kind::active_shell);
  CHECK(spec.lambda_kind == LambdaKind::zero);
}

TEST_CASE("config errors name the offending key") {
  CHECK_THROWS_WITH_AS(io::spec_from_config(R"({"A": {}})"),
                       doctest::Contains("profile"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      io::spec_from_config(
          R"({"profile": {"kind": "catenoid"}, "h_list": [0.1]})"),
      doctest::Contains("A"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      io::spec_from_config(
          R"({"profile": {"kind": "catenoid"},
              "A": {"s_window": [-1, -0.5, 0.5, 1]}})"),
      doctest::Contains("h_list"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      io::spec_from_config(
          R"({"profile": {"kind": "catenoid"},
              "A": {"s_window": [-1, 0.5, 1]}, "h_list": [0.1]})"),
      doctest::Contains("s_window"), std::invalid_argument);
}

TEST_CASE("canonical configs are a serialization fixed point") {
  std::string once = io::canonical_config(kMinimalConfig);
  std::string twice = io::canonical_config(once);
  CHECK(once == twice);
  CHECK(once != kMinimalConfig);
  CHECK(io::content_hash(once) == io::content_hash(twice));
  CHECK(io::content_hash(once) != io::content_hash("something else"));
}

TEST_CASE("overrides touch only run parameters") {
  ExperimentSpec spec = io::spec_from_config(kMinimalConfig);
  io::apply_overrides(
      spec, R"({"h_list": [0.2, 0.1], "seed": 7, "pts_per_h": 16})");
  CHECK(spec.h_list == std::vector<double>{0.2, 0.1});
  CHECK(spec.seed == 7);
  CHECK(spec.pts_per_h == 16.0);
  CHECK(spec.name == "tiny");
}

TEST_CASE("headers carry the reference anchor and skip timestamps on demand") {
  io::Header hdr;
  hdr.command = "sweep";
  hdr.preset = "prop53";
  hdr.config_hash = "abc";
  hdr.seed = 42;
  hdr.timestamp = false;
  std::ostringstream os;
  io::write_header(os, hdr);
  std::string text = os.str();
  CHECK(text.find("Prop 5.3") != std::string::npos);
  CHECK(text.find("generated") == std::string::npos);
  CHECK(text.find("seed 42") != std::string::npos);

  std::ostringstream os2;
  hdr.timestamp = true;
  io::write_header(os2, hdr);
  CHECK(os2.str().find("# generated") != std::string::npos);
}

TEST_CASE("anchors exist for every preset") {
  for (const auto& name : preset_names())
    CHECK_FALSE(io::paper_anchor(name).empty());
}

TEST_CASE("number formatting is locale independent and terse") {
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(1e-9) == "1e-09");
  CHECK(io::format_double(-3.25) == "-3.25");
}
