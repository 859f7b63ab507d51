#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mmctl/model.hpp"
#include "test_util.hpp"

using namespace mmctl;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  s.replace(pos, from.size(), to);
  return s;
}

int line_of(const std::string& text, const std::string& needle) {
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
}

}  // namespace

TEST_CASE("bundled model loads and matches the file on disk") {
  const auto& m = default_model();
  CHECK(m.dof() == 7);
  CHECK(m.name == "arm7");
  CHECK(m.links[0].mass == doctest::Approx(4.970684));
  CHECK(m.joints[3].upper == doctest::Approx(-0.0698));
  const auto from_disk = load_model(testing::source_path("models/arm7.yaml"));
  CHECK(from_disk.home.isApprox(m.home));
  for (int i = 0; i < 7; ++i) {
    CHECK(m.joints[i].axis.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(is_physical(m.links[i].mass, m.links[i].inertia));
  }
}

TEST_CASE("loader rejects invariant violations with line numbers") {
  const std::string text = read_file(testing::source_path("models/arm7.yaml"));

  SUBCASE("non-positive mass") {
    const auto bad = replace_once(text, "mass: 1.225946", "mass: -1.0");
    try {
      parse_model(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.line() == line_of(bad, "mass: -1.0"));
    }
  }
  SUBCASE("triangle inequality") {
    const auto bad = replace_once(text, "inertia: [0.001964, 0.000109, -0.001158, 0.004354",
                                  "inertia: [0.1, 0.0, 0.0, 0.004354");
    try {
      parse_model(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.line() == line_of(bad, "inertia: [0.1, 0.0"));
    }
  }
  SUBCASE("non-unit axis") {
    auto bad = replace_once(text, "axis: [0.0, 0.0, 1.0]", "axis: [0.0, 0.1, 1.0]");
    CHECK_THROWS_AS(parse_model(bad), FormatError);
  }
  SUBCASE("unknown key") {
    auto bad = replace_once(text, "version: 1", "version: 1\nflavour: sweet");
    try {
      parse_model(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.line() == line_of(bad, "flavour"));
      CHECK(std::string(e.what()).find("flavour") != std::string::npos);
    }
  }
  SUBCASE("wrong home length") {
    auto bad = replace_once(text, "home: [0.0, ", "home: [");
    CHECK_THROWS_AS(parse_model(bad), FormatError);
  }
}

TEST_CASE("dump and parse round trip") {
  const auto& m = default_model();
  const auto back = parse_model(dump_model(m));
  REQUIRE(back.dof() == m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    CHECK(back.links[i].mass == m.links[i].mass);
    CHECK(back.links[i].com == m.links[i].com);
    CHECK(back.links[i].inertia == m.links[i].inertia);
    CHECK(back.joints[i].origin.rotation.isApprox(m.joints[i].origin.rotation, 1e-14));
  }
}

TEST_CASE("is_physical") {
  CHECK(is_physical(1.0, Mat3::Identity()));
  CHECK_FALSE(is_physical(0.0, Mat3::Identity()));
  CHECK_FALSE(is_physical(1.0, Vec3(1, 1, 3).asDiagonal()));
  CHECK_FALSE(is_physical(1.0, Vec3(1, 1, -1).asDiagonal()));
  Mat3 asym = Mat3::Identity();
  asym(0, 1) = 0.1;
  CHECK_FALSE(is_physical(1.0, asym));
}
