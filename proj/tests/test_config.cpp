#include <cstdio>
#include <fstream>
#include <string>

#include <doctest.h>

#include "driftkde/config.hpp"
#include "driftkde/csv.hpp"

using namespace driftkde;

TEST_CASE("key = value parsing with comments and whitespace") {
  Config cfg = Config::parse_string(
      "# a comment line\n"
      "mode = track-density   # trailing comment\n"
      "  steps=100\n"
      "\n"
      "rho = const:0.1\n"
      "deltas = 1e-2, 3e-3 ,1e-3\n"
      "normalized = false\n");
  CHECK(cfg.has("mode"));
  CHECK(!cfg.has("absent"));
  CHECK(cfg.get_string("mode") == "track-density");
  CHECK(cfg.get_long("steps") == 100);
  CHECK(cfg.get_string("rho") == "const:0.1");
  const auto list = cfg.get_double_list("deltas");
  REQUIRE(list.size() == 3);
  CHECK(list[0] == 1e-2);
  CHECK(list[1] == 3e-3);
  CHECK(list[2] == 1e-3);
  CHECK(cfg.get_bool("normalized", true) == false);
  cfg.require_all_consumed();  // everything was read
}

TEST_CASE("typed accessors with fallbacks") {
  Config cfg = Config::parse_string("x = 2.5\n");
  CHECK(cfg.get_double("x", 0.0) == 2.5);
  CHECK(cfg.get_double("missing", 7.0) == 7.0);
  CHECK(cfg.get_long("missing", 3) == 3);
  CHECK(cfg.get_string("missing", "d") == "d");
  CHECK(cfg.get_bool("missing", true) == true);
}

TEST_CASE("config parse and accessor errors") {
  CHECK_THROWS_AS(Config::parse_string("just words\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("= 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("a = 1\na = 2\n"), ConfigError);
  Config cfg = Config::parse_string(
      "num = abc\nint = 1.5\nflag = maybe\nlist = ,\n");
  CHECK_THROWS_AS(cfg.get_string("missing"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("num"), ConfigError);
  CHECK_THROWS_AS(cfg.get_long("int"), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("flag", true), ConfigError);
  CHECK_THROWS_AS(cfg.get_double_list("list"), ConfigError);
}

TEST_CASE("unconsumed keys are hard errors") {
  Config cfg = Config::parse_string("known = 1\ntypo_key = 2\n");
  cfg.get_long("known");
  CHECK_THROWS_AS(cfg.require_all_consumed(), ConfigError);
  try {
    cfg.require_all_consumed();
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("typo_key") != std::string::npos);
  }
}

TEST_CASE("file parsing carries the path in errors") {
  CHECK_THROWS_AS(Config::parse_file("/nonexistent/path.cfg"), ConfigError);
  const std::string path = "config_roundtrip_test.cfg";
  {
    std::ofstream f(path);
    f << "a = 1\nb = two\n";
  }
  Config cfg = Config::parse_file(path);
  CHECK(cfg.get_long("a") == 1);
  CHECK(cfg.get_string("b") == "two");
  std::remove(path.c_str());
}

TEST_CASE("double formatting round-trips exactly") {
  CHECK(csv::format_double(0.1) == "0.1");
  CHECK(csv::format_double(-2.0) == "-2");
  CHECK(csv::format_double(0.0) == "0");
  for (double v : {1.0 / 3.0, 1e-300, 123456.789, 2.2250738585072014e-308}) {
    CHECK(std::stod(csv::format_double(v)) == v);
    CHECK(std::stod(csv::format_double(-v)) == -v);
  }
}

TEST_CASE("table layout is comments, columns, rows") {
  csv::Table t;
  t.comment("hello");
  t.comment("world");
  t.columns({"a", "b", "c"});
  t.row().add(1L).add(0.5).add("x");
  t.row().add(2L).add(-1.25).add("y");
  CHECK(t.str() ==
        "# hello\n"
        "# world\n"
        "a,b,c\n"
        "1,0.5,x\n"
        "2,-1.25,y\n");
}
