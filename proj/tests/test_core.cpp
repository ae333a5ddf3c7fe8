#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "opencap/core.hpp"
#include "opencap/rng.hpp"

using namespace opencap;

TEST_CASE("power setting ordering and labels") {
    CHECK(PowerSetting{100, 200} < PowerSetting{100, 250});
    CHECK(PowerSetting{100, 250} < PowerSetting{125, 100});
    CHECK(PowerSetting{150, 200} == PowerSetting{150, 200});
    CHECK(setting_label({200, 250}) == "c200_g250");
    CHECK(parse_setting_label("c200_g250") == PowerSetting{200, 250});
    CHECK(!parse_setting_label("c200g250").has_value());
    CHECK(!parse_setting_label("cx_g250").has_value());
    CHECK(!parse_setting_label("").has_value());
}

TEST_CASE("grid construction and iteration order") {
    const auto grid = PowerGrid::default_grid();
    CHECK(grid.baseline() == PowerSetting{200, 250});
    const auto settings = grid.settings();
    CHECK(settings.size() == 20);
    CHECK(settings.front() == PowerSetting{100, 100});
    CHECK(settings.back() == PowerSetting{200, 250});
    for (std::size_t i = 1; i < settings.size(); ++i) CHECK(settings[i - 1] < settings[i]);
    CHECK(grid.contains({150, 200}));
    CHECK(!grid.contains({110, 200}));

    CHECK_THROWS_AS(PowerGrid({}, {100}), std::invalid_argument);
    CHECK_THROWS_AS(PowerGrid({100, 100}, {100}), std::invalid_argument);
    CHECK_THROWS_AS(PowerGrid({100, 90}, {100}), std::invalid_argument);
}

TEST_CASE("matrix construction") {
    PerformanceMatrix m({"a", "b"}, PowerGrid({100, 200}, {150, 250}));
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 4);
    CHECK(m.observed_count() == 0);

    // 10 training apps on the default 5x4 grid
    std::vector<std::string> apps;
    for (int i = 0; i < 10; ++i) apps.push_back("app" + std::to_string(i));
    PerformanceMatrix big(apps, PowerGrid::default_grid());
    CHECK(big.rows() == 10);
    CHECK(big.cols() == 20);

    PerformanceMatrix tiny({"solo"}, PowerGrid({120}, {180}));
    CHECK(tiny.cols() == 1);
    CHECK(tiny.settings()[0] == PowerSetting{120, 180});

    CHECK_THROWS_AS(PerformanceMatrix({"a", "a"}, PowerGrid::default_grid()), std::invalid_argument);
    CHECK_THROWS_AS(PerformanceMatrix({}, PowerGrid::default_grid()), std::invalid_argument);
}

TEST_CASE("matrix set semantics") {
    PerformanceMatrix m({"app0", "app1"}, PowerGrid({100, 200}, {150, 250}));
    m.set("app0", {200, 250}, 1.0);
    CHECK(m.observed(0, 3));
    CHECK(m.value(0, 3) == 1.0);
    m.set("app0", {200, 250}, 0.9); // last write wins
    CHECK(m.value(0, 3) == 0.9);
    CHECK(m.observed_count() == 1);

    CHECK_THROWS_AS(m.set("app0", {200, 250}, 1.3), std::invalid_argument);
    CHECK_THROWS_AS(m.set("app0", {200, 250}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(m.set("app0", {200, 250}, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(m.set("nope", {200, 250}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(m.set("app0", {111, 250}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(m.value(0, 0), std::invalid_argument); // unobserved read
}

TEST_CASE("random writes never touch unrelated cells") {
    Rng rng(99);
    const auto grid = PowerGrid::default_grid();
    PerformanceMatrix m({"a", "b", "c"}, grid);
    std::vector<std::vector<double>> shadow(3, std::vector<double>(20, -1.0));
    for (int step = 0; step < 300; ++step) {
        const auto i = static_cast<std::size_t>(rng.uniform_int(0, 2));
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, 19));
        const double v = rng.uniform(0.05, 1.25);
        m.set(i, j, v);
        shadow[i][j] = v;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 20; ++c) {
                CHECK(m.observed(r, c) == (shadow[r][c] >= 0));
                if (shadow[r][c] >= 0) CHECK(m.value(r, c) == shadow[r][c]);
            }
    }
}

TEST_CASE("csv round trip: empty 1x1") {
    PerformanceMatrix m({"only"}, PowerGrid({100}, {100}));
    std::ostringstream out;
    write_matrix_csv(m, out);
    CHECK(out.str() == "app,c100_g100\nonly,\n");
    std::istringstream in(out.str());
    const auto back = read_matrix_csv(in);
    CHECK(back == m);
}

TEST_CASE("csv round trip: random matrices") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const auto nc = rng.uniform_int(1, 4);
        const auto ng = rng.uniform_int(1, 4);
        std::vector<int> cc, gc;
        int base = 50;
        for (int i = 0; i < nc; ++i) cc.push_back(base += static_cast<int>(rng.uniform_int(10, 60)));
        base = 60;
        for (int i = 0; i < ng; ++i) gc.push_back(base += static_cast<int>(rng.uniform_int(10, 60)));
        const PowerGrid grid(cc, gc);
        std::vector<std::string> apps;
        const auto napps = rng.uniform_int(1, 6);
        for (int i = 0; i < napps; ++i) apps.push_back("w" + std::to_string(i));
        PerformanceMatrix m(apps, grid);
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                if (rng.uniform() < 0.5) m.set(i, j, rng.uniform(1e-3, 1.25));
        std::ostringstream out;
        write_matrix_csv(m, out);
        std::istringstream in(out.str());
        CHECK(read_matrix_csv(in) == m);
    }
}

TEST_CASE("csv error paths") {
    const auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_matrix_csv(in);
    };
    CHECK_THROWS_AS(parse(""), config_error);
    CHECK_THROWS_AS(parse("bogus,c100_g100\n"), config_error);
    CHECK_THROWS_AS(parse("app,c100g100\na,1\n"), config_error);           // bad label
    CHECK_THROWS_AS(parse("app,c100_g100\na,1,0.5\n"), config_error);      // ragged
    CHECK_THROWS_AS(parse("app,c100_g100\na,zebra\n"), config_error);      // non-numeric
    CHECK_THROWS_AS(parse("app\n"), config_error);                          // no columns
}

TEST_CASE("round-trip-exact double formatting") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(1e-6, 1.25);
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.9) == "0.9");
}
