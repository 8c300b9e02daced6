#include "seal/csv.hpp"
#include "seal/errors.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace seal;

TEST_SUITE("csv") {

TEST_CASE("split handles quotes and empty fields") {
    const auto f = csv::split_line(R"(a,"b,c",,"say ""hi""")");
    REQUIRE(f.size() == 4);
    CHECK(f[0] == "a");
    CHECK(f[1] == "b,c");
    CHECK(f[2] == "");
    CHECK(f[3] == "say \"hi\"");
}

TEST_CASE("join then split round-trips") {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", ""};
    CHECK(csv::split_line(csv::join_line(fields)) == fields);
}

TEST_CASE("parse_double rejects partial numbers") {
    CHECK(csv::parse_double("1.5").value() == 1.5);
    CHECK(csv::parse_double("-2e-3").value() == -2e-3);
    CHECK_FALSE(csv::parse_double("1.5x").has_value());
    CHECK_FALSE(csv::parse_double("").has_value());
    CHECK_FALSE(csv::parse_double("abc").has_value());
}

TEST_CASE("format_double round-trips exactly") {
    seal::Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.uniform_index(40)) - 20.0);
        const auto text = csv::format_double(v);
        CHECK(csv::parse_double(text).value() == v);
    }
    CHECK(csv::format_double(0.1) == "0.1");
    CHECK(csv::format_double(std::numeric_limits<double>::quiet_NaN()) == "NaN");
}

TEST_CASE("read_lines strips BOM and carriage returns") {
    testing::TempDir dir("csv");
    csv::write_text(dir / "f.csv", "\xEF\xBB\xBFh1,h2\r\n1,2\r\n");
    const auto lines = csv::read_lines(dir / "f.csv");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "h1,h2");
    CHECK(lines[1] == "1,2");
}

TEST_CASE("missing file is an IO error") {
    CHECK_THROWS_AS(csv::read_text("/nonexistent/dir/file.csv"), IoError);
}

}
