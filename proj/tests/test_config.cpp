#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "radseek/config.hpp"

using namespace radseek;

TEST_CASE("parses keys, comments and blank lines") {
  const auto cfg = KeyValueConfig::parse(
      "# comment\n"
      "a = 1.5\n"
      "\n"
      "name = probe   # trailing comment\n"
      "vec = 1 2 3\n");
  CHECK(cfg.get_double("a") == doctest::Approx(1.5));
  CHECK(cfg.get_string("name") == "probe");
  const auto v = cfg.get_doubles("vec", 3);
  CHECK(v[2] == doctest::Approx(3.0));
  CHECK(cfg.get_bool("missing", true));
  CHECK(cfg.get_int("missing", 7) == 7);
}

TEST_CASE("errors carry file, line and key") {
  try {
    KeyValueConfig::parse("a = 1\nb 2\n", "demo.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("demo.txt:2") != std::string::npos);
  }

  const auto cfg = KeyValueConfig::parse("x = abc\n", "demo.txt");
  try {
    cfg.get_double("x");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "x");
    CHECK(e.line() == 1);
  }
}

TEST_CASE("wrong arity and missing keys are rejected") {
  const auto cfg = KeyValueConfig::parse("v = 1 2\n");
  CHECK_THROWS_AS(cfg.get_doubles("v", 3), ConfigError);
  CHECK_THROWS_AS(cfg.get_string("nope"), ConfigError);
}

TEST_CASE("merge overrides earlier values") {
  auto base = KeyValueConfig::parse("a = 1\nb = 2\n");
  const auto over = KeyValueConfig::parse("b = 5\n");
  base.merge(over);
  CHECK(base.get_int("a") == 1);
  CHECK(base.get_int("b") == 5);
}
