#include <doctest.h>

#include <string>

#include "lgir/config.hpp"

using namespace lgir;

namespace {

const std::string kMinimal = R"(
[experiment]
name = normalization

[potential]
kind = isotropic
dim = 2

[grid]
T = 1
N = 8
)";

std::string error_of(const std::string& text) {
  try {
    const auto cfg = load_config(text);
    check_step_bounds(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a minimal configuration is valid and fills in defaults") {
  const auto cfg = load_config(kMinimal);
  CHECK(cfg.experiment == Experiment::Normalization);
  CHECK(cfg.potential.dim == 2);
  CHECK(cfg.steps == std::vector<int>{8});
  CHECK(cfg.m == 8);
  CHECK(cfg.scheme == Scheme::Mlmc);
  CHECK(cfg.grid().h() == doctest::Approx(0.125));
  CHECK_NOTHROW(check_step_bounds(cfg));
  CHECK(cfg.hash().size() == 16);
}

TEST_CASE("step sizes may be given as h and as lists") {
  const auto cfg = load_config(R"(
[experiment]
name = kl-order-sweep
[potential]
kind = anisotropic
spectrum = 1, 2
[grid]
T = 1
h = 0.25, 0.125, 0.0625
m = 4
)");
  CHECK(cfg.steps == std::vector<int>{4, 8, 16});
  CHECK(cfg.step_sizes()[2] == doctest::Approx(0.0625));
  CHECK(cfg.potential.dim == 2);
  CHECK(error_of("[experiment]\nname = normalization\n[potential]\nkind = isotropic\n[grid]\nT = 1\nh = 0.3\n")
            .find("does not divide") != std::string::npos);
}

TEST_CASE("violated step bound is a configuration error") {
  // h = 2 / beta with q = 2: h beta q = 4 > 1.
  const std::string text = R"(
[experiment]
name = normalization
[potential]
kind = isotropic
dim = 2
scale = 1
[grid]
T = 4
h = 2
[scheme]
name = M-LMC
q = 2
)";
  const std::string msg = error_of(text);
  CHECK(msg.find("h <= 1/(beta*q)") != std::string::npos);

  std::string dm = text;
  dm.replace(dm.find("M-LMC"), 5, "DM-ULMC");
  dm.replace(dm.find("h = 2"), 5, "h = 1");
  dm.replace(dm.find("scale = 1"), 9, "scale = 4");
  CHECK(error_of(dm).find("h <= 1/sqrt(beta*q)") != std::string::npos);
}

TEST_CASE("duplicate keys name both lines") {
  const std::string msg = error_of(kMinimal + "N = 4\n");
  CHECK(msg.find("duplicate key 'grid.N'") != std::string::npos);
  CHECK(msg.find("line 12") != std::string::npos);
  CHECK(msg.find("line 11") != std::string::npos);
}

TEST_CASE("unknown keys, sections and malformed values are rejected") {
  CHECK(error_of(kMinimal + "colour = blue\n").find("unknown key 'grid.colour'") != std::string::npos);
  CHECK(error_of(kMinimal + "[extra]\nx = 1\n").find("unknown key") != std::string::npos);
  CHECK(error_of(kMinimal + "m = four\n").find("line 12") != std::string::npos);
  CHECK(error_of(kMinimal + "m = 2.5\n").find("must be an integer") != std::string::npos);
  CHECK(error_of(kMinimal + "[scheme\n").find("malformed section header") != std::string::npos);
  CHECK(error_of(kMinimal + "[scheme]\nname = RK4\n").find("unknown scheme") != std::string::npos);
  CHECK(error_of(kMinimal + "[scheme]\nq = 1\n").find("must exceed 1") != std::string::npos);
  CHECK(error_of("[potential]\nkind = isotropic\n[grid]\nT = 1\nN = 2\n").find("missing required key") !=
        std::string::npos);
}

TEST_CASE("canonical text and hash ignore the output path and formatting") {
  const auto a = load_config(kMinimal);
  const auto b = load_config(kMinimal + "\n# comment\n[experiment]\noutput = /tmp/x.csv\n");
  CHECK(a.hash() == b.hash());
  const auto c = load_config(kMinimal + "m = 16\n");
  CHECK(a.hash() != c.hash());
}

TEST_CASE("setup from a configuration") {
  const auto cfg = load_config(kMinimal + "m = 4\n[scheme]\nname = DM-ULMC\ngamma = 2\n[initial]\nlaw = point\nx0 = 1\n");
  const auto setup = make_setup(cfg);
  CHECK(setup.scheme == Scheme::DmUlmc);
  CHECK(setup.gamma == 2.0);
  CHECK(setup.grid == make_grid(1.0, 8, 4));
  CHECK(setup.init.x_mean == Vec::Ones(2));
  CHECK(setup.init.x_std.norm() == 0.0);
}
