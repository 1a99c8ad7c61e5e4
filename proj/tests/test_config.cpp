#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hetin/config.hpp"

using namespace hetin;
using Catch::Approx;

TEST_CASE("defaults validate") {
  Config cfg = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  const auto v = validate(cfg.sys, cfg.sch, cfg.num);
  CHECK(v.ok());
}

TEST_CASE("parse sets linear powers from dB keys") {
  const Config cfg = parse_config(
      "p1_db_over_p2 = 13\n"
      "bias_db = 4\n"
      "alpha1 = 4.5\n"
      "alpha2 = 4.7\n"
      "lambda1 = 8e-5\n"
      "lambda2 = 1e-3\n");
  CHECK(cfg.sys.p1 == Approx(std::pow(10.0, 1.3)).epsilon(1e-15));
  CHECK(cfg.sys.p2 == 1.0);
  CHECK(cfg.sys.biasB == Approx(std::pow(10.0, 0.4)).epsilon(1e-15));
  CHECK(cfg.sys.alpha1 == 4.5);
  CHECK(cfg.sys.lambda2 == 1e-3);
  // Derived window radius resolved on load.
  CHECK(cfg.num.mcWindowRadius ==
        Approx(6.0 / std::sqrt(M_PI * 8e-5)).epsilon(1e-12));
}

TEST_CASE("comments, blank lines, and whitespace are tolerated") {
  const Config cfg = parse_config(
      "# header comment\n"
      "\n"
      "  n1   =  10   # trailing comment\n"
      "\tscheme = abs\n");
  CHECK(cfg.sys.n1 == 10);
  CHECK(cfg.sch.scheme == Scheme::ABS);
}

TEST_CASE("serialize -> parse -> serialize is byte-identical") {
  Config cfg = parse_config(
      "lambda1 = 8e-05\n"
      "lambda2 = 0.001\n"
      "lambda_u = 0.03\n"
      "p1_db_over_p2 = 13\n"
      "alpha1 = 4.5\n"
      "alpha2 = 4.7\n"
      "n1 = 10\n"
      "n2 = 8\n"
      "bias_db = 4\n"
      "scheme = in\n"
      "in_dof = 3\n"
      "tau_bps = 500000\n");
  const std::string s1 = serialize_config(cfg);
  const Config cfg2 = parse_config(s1);
  const std::string s2 = serialize_config(cfg2);
  CHECK(s1 == s2);
}

TEST_CASE("round-trip through a file") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "hetin_cfg_test.conf";
  Config cfg = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  cfg.sys.lambdaU = 0.05;
  cfg.sch.inDof = 2;
  save_config_file(cfg, path.string());
  const Config back = load_config_file(path.string());
  CHECK(back.sys.lambdaU == cfg.sys.lambdaU);
  CHECK(back.sch.inDof == 2);
  CHECK(serialize_config(back) == serialize_config(cfg));
  fs::remove(path);
}

TEST_CASE("unknown keys and malformed values are rejected") {
  CHECK_THROWS_AS(parse_config("nonsense_key = 1\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_config("lambda1 = banana\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_config("just a line without equals\n"),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_config("scheme = carrier_pigeon\n"),
                  std::runtime_error);
}

TEST_CASE("override helper applies key=value strings") {
  Config cfg = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  apply_override(cfg, "lambda_u = 0.02");
  apply_override(cfg, "numerics.mc_drops=777");
  CHECK(cfg.sys.lambdaU == 0.02);
  CHECK(cfg.num.mcDrops == 777);
  CHECK_THROWS_AS(apply_override(cfg, "no-equals-here"), std::runtime_error);
}

TEST_CASE("validation flags out-of-domain parameters") {
  Config cfg = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  cfg.sys.alpha1 = 2.0;  // path-loss exponent must exceed 2
  CHECK_FALSE(validate(cfg.sys, cfg.sch, cfg.num).ok());

  Config cfg2 = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  cfg2.sys.biasB = 0.5;  // bias must be >= 1
  CHECK_FALSE(validate(cfg2.sys, cfg2.sch, cfg2.num).ok());

  Config cfg3 = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  cfg3.sch.inDof = cfg3.sys.n1;  // nulling budget capped at n1-1
  CHECK_FALSE(validate(cfg3.sys, cfg3.sch, cfg3.num).ok());

  Config cfg4 = make_config(SystemParams{}, SchemeParams{}, NumericsParams{});
  cfg4.sch.absEta = 1.0;  // subframe share strictly inside (0,1)
  CHECK_FALSE(validate(cfg4.sys, cfg4.sch, cfg4.num).ok());
}

TEST_CASE("power-ratio normalization preserves the ratio") {
  SystemParams sys;
  sys.p1 = 63.0;
  sys.p2 = 3.0;
  const SystemParams n = normalize_power_ratio(sys);
  CHECK(n.p2 == 1.0);
  CHECK(n.p1 == Approx(21.0).epsilon(1e-15));
}
