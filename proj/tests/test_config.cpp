#include <doctest.h>

#include <cmath>

#include "iontrap/config.hpp"
#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

using namespace iontrap;
namespace c = constants;

TEST_CASE("default ca40 constants") {
  const IonSpecies s = default_ca40();
  CHECK(s.mass == doctest::Approx(6.642e-26).epsilon(1e-4));
  CHECK(s.gamma1 == doctest::Approx(1.408e8).epsilon(1e-3));
  CHECK(s.k1 == doctest::Approx(1.583e7).epsilon(1e-3));
  CHECK(s.k1 > s.k2);
  CHECK(s.leak_fraction == doctest::Approx(0.06));
}

TEST_CASE("validate accepts the experiment defaults") {
  ExperimentConfig cfg;
  cfg.alpha = 3.205;
  cfg.omega_z_mhz = 0.1;
  const ExperimentConfig v = validate(cfg);
  CHECK(v.dt_s > 0);
  CHECK(v.dt_s * estimated_omega_max(v) < 0.1);
}

TEST_CASE("validate rejects bad fields with field paths") {
  ExperimentConfig cfg;
  cfg.alpha = 0.5;
  try {
    validate(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    bool found = false;
    for (const auto& issue : e.issues())
      if (issue.find("alpha") != std::string::npos &&
          issue.find("exceed 1") != std::string::npos)
        found = true;
    CHECK(found);
  }

  cfg = ExperimentConfig{};
  cfg.dt_s = 1.0;  // absurd step
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("validate is idempotent") {
  ExperimentConfig cfg;
  const ExperimentConfig once = validate(cfg);
  const ExperimentConfig twice = validate(once);
  CHECK(serialize_config(once) == serialize_config(twice));
}

TEST_CASE("load_config parses, rejects unknown keys, defaults missing ones") {
  const ExperimentConfig cfg = load_config("n_ions = 7\nalpha = 3.205\n");
  CHECK(cfg.n_ions == 7);
  CHECK(cfg.alpha == doctest::Approx(3.205));
  CHECK(cfg.rabi_397_mhz == doctest::Approx(78.0));  // default

  const ExperimentConfig empty = load_config("");
  CHECK(empty.n_ions == 7);

  try {
    load_config("alpha = banana\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  try {
    load_config("alpha = 3.2\nbogus_key = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
}

TEST_CASE("serialize round trip is the identity on normalized configs") {
  ExperimentConfig cfg;
  cfg.alpha = 3.279;
  cfg.delta_397_mhz = -33.7;
  cfg.seed = 4242;
  const ExperimentConfig norm = validate(cfg);
  const ExperimentConfig back = load_config(serialize_config(norm));
  CHECK(serialize_config(back) == serialize_config(norm));
  CHECK(config_hash(back) == config_hash(norm));
}

TEST_CASE("MHz to angular conversion is exact") {
  ExperimentConfig cfg = load_config("delta_397_mhz = -40\n");
  CHECK(cfg.lasers().delta_397 == -40.0 * c::mhz_to_angular);
  CHECK(cfg.lasers().delta_397 ==
        doctest::Approx(-2.0 * c::pi * 40e6).epsilon(1e-15));
}

TEST_CASE("config hash is stable and sensitive") {
  ExperimentConfig a, b;
  b.alpha = 3.21;
  CHECK(config_hash(a) == config_hash(a));
  CHECK(config_hash(a) != config_hash(b));
}
