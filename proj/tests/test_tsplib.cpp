#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hpn/tsp.hpp"
#include "hpn/tsplib.hpp"

#ifndef HPN_FIXTURE_DIR
#define HPN_FIXTURE_DIR "tests/fixtures"
#endif

static std::string fixture(const std::string& name) {
    return std::string(HPN_FIXTURE_DIR) + "/" + name;
}

TEST_CASE("tsplib parsing") {
    SECTION("three-node fixtures, keyword variants, scrambled indices") {
        for (const char* f : {"tri_colon.tsp", "tri_nocolon.tsp", "tri_scrambled.tsp"}) {
            INFO(f);
            auto inst = hpn::parse_tsplib(fixture(f));
            REQUIRE(inst.dimension == 3);
            REQUIRE(inst.raw_coords.size() == 3);
            CHECK(inst.edge_weight_type == hpn::EdgeWeightType::Euc2D);
            CHECK(inst.raw_coords[0].x == 0.0);
            CHECK(inst.raw_coords[0].y == 0.0);
            CHECK(inst.raw_coords[1].x == 3.0);
            CHECK(inst.raw_coords[1].y == 0.0);
            CHECK(inst.raw_coords[2].x == 0.0);
            CHECK(inst.raw_coords[2].y == 4.0);
        }
    }

    SECTION("edge weight type variants") {
        CHECK(hpn::parse_tsplib(fixture("geo_small.tsp")).edge_weight_type ==
              hpn::EdgeWeightType::Geo);
        CHECK(hpn::parse_tsplib(fixture("ceil_small.tsp")).edge_weight_type ==
              hpn::EdgeWeightType::Ceil2D);
    }

    SECTION("missing DIMENSION reported") {
        CHECK_THROWS_WITH(hpn::parse_tsplib(fixture("bad_missing_dimension.tsp")),
                          Catch::Matchers::ContainsSubstring("DIMENSION"));
    }

    SECTION("coordinate count mismatch reported") {
        CHECK_THROWS_WITH(hpn::parse_tsplib(fixture("bad_count_mismatch.tsp")),
                          Catch::Matchers::ContainsSubstring("DIMENSION says 4"));
    }

    SECTION("unparseable number reported with its line") {
        CHECK_THROWS_WITH(hpn::parse_tsplib(fixture("bad_number.tsp")),
                          Catch::Matchers::ContainsSubstring("line 5") &&
                              Catch::Matchers::ContainsSubstring("zero"));
    }

    SECTION("every fixture either parses or throws a located error") {
        namespace fs = std::filesystem;
        for (const auto& entry : fs::directory_iterator(HPN_FIXTURE_DIR)) {
            INFO(entry.path().string());
            try {
                auto inst = hpn::parse_tsplib(entry.path().string());
                CHECK(inst.dimension >= 1);
            } catch (const hpn::TsplibParseError& e) {
                CHECK(e.line() >= 1);
            }
        }
    }

    SECTION("content after EOF keyword is ignored") {
        std::istringstream is(
            "DIMENSION: 2\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF\n"
            "garbage that must not be read\n");
        CHECK(hpn::parse_tsplib(is).dimension == 2);
    }

    SECTION("numeric dimension suffix convention holds on a large synthetic file") {
        const std::string path = "synthetic_big.tsp";
        {
            std::ofstream os(path);
            os << "NAME: xx1000\nDIMENSION: 1000\nEDGE_WEIGHT_TYPE: EUC_2D\n"
               << "NODE_COORD_SECTION\n";
            for (int i = 1; i <= 1000; ++i) os << i << " " << i * 3.5 << " " << (i % 97) << "\n";
            os << "EOF\n";
        }
        auto inst = hpn::parse_tsplib(path);
        CHECK(inst.dimension == 1000);
        CHECK(inst.name == "xx1000");
        std::remove(path.c_str());
    }
}

TEST_CASE("normalization") {
    hpn::TsplibInstance raw;
    raw.name = "box";
    raw.dimension = 4;
    raw.edge_weight_type = hpn::EdgeWeightType::Euc2D;
    raw.raw_coords = {{10, 10}, {20, 10}, {20, 15}, {10, 15}};

    SECTION("isotropic scale and offset") {
        auto norm = hpn::normalize(raw);
        CHECK(norm.scale == 10.0);
        CHECK(norm.offset.x == 10.0);
        CHECK(norm.offset.y == 10.0);
        double max_x = 0, max_y = 0;
        for (const auto& p : norm.instance.coords) {
            CHECK(p.x >= 0.0);
            CHECK(p.y >= 0.0);
            max_x = std::max(max_x, p.x);
            max_y = std::max(max_y, p.y);
        }
        CHECK(max_x == 1.0);
        CHECK(max_y == 0.5);
    }

    SECTION("single city degenerates to scale 1 at the origin") {
        hpn::TsplibInstance one;
        one.dimension = 1;
        one.raw_coords = {{42.0, 17.0}};
        auto norm = hpn::normalize(one);
        CHECK(norm.scale == 1.0);
        CHECK(norm.instance.coords[0].x == 0.0);
        CHECK(norm.instance.coords[0].y == 0.0);
    }

    SECTION("round trip recovers raw coordinates") {
        hpn::rng::Engine eng(9);
        hpn::TsplibInstance r2;
        r2.dimension = 40;
        for (int i = 0; i < 40; ++i)
            r2.raw_coords.push_back(
                {hpn::rng::unit(eng) * 5000 - 1000, hpn::rng::unit(eng) * 300 + 70});
        auto norm = hpn::normalize(r2);
        for (int i = 0; i < 40; ++i) {
            const auto back = hpn::denormalize_point(norm, norm.instance.coords[i]);
            CHECK(back.x == Catch::Approx(r2.raw_coords[i].x).margin(1e-9));
            CHECK(back.y == Catch::Approx(r2.raw_coords[i].y).margin(1e-9));
        }
    }
}

TEST_CASE("length denormalization") {
    hpn::TsplibInstance raw;
    raw.dimension = 2;
    raw.raw_coords = {{0, 0}, {10, 0}};
    auto norm = hpn::normalize(raw);

    CHECK(hpn::denormalize_length(norm, 4.0) == 40.0);
    CHECK(hpn::denormalize_length(norm, 0.0) == 0.0);
    CHECK_THROWS_AS(hpn::denormalize_length(norm, -1.0), std::invalid_argument);

    SECTION("matches recomputation on raw coordinates") {
        hpn::rng::Engine eng(33);
        hpn::TsplibInstance r2;
        r2.dimension = 30;
        for (int i = 0; i < 30; ++i)
            r2.raw_coords.push_back(
                {hpn::rng::unit(eng) * 900 + 100, hpn::rng::unit(eng) * 444 - 22});
        auto n2 = hpn::normalize(r2);
        hpn::Instance raw_inst{r2.raw_coords};

        std::vector<int> tour(30);
        for (int i = 0; i < 30; ++i) tour[i] = i;
        for (int i = 29; i > 0; --i) std::swap(tour[i], tour[hpn::rng::index(eng, i + 1)]);

        const double norm_len = hpn::tour_length(n2.instance, tour);
        const double raw_len = hpn::tour_length(raw_inst, tour);
        CHECK(hpn::denormalize_length(n2, norm_len) ==
              Catch::Approx(raw_len).epsilon(1e-6));
    }
}

TEST_CASE("normalization preserves optimal tour order") {
    hpn::rng::Engine eng(55);
    for (int trial = 0; trial < 10; ++trial) {
        hpn::TsplibInstance raw;
        raw.dimension = 7;
        for (int i = 0; i < 7; ++i)
            raw.raw_coords.push_back(
                {hpn::rng::unit(eng) * 800 + 50, hpn::rng::unit(eng) * 1200 - 400});
        auto norm = hpn::normalize(raw);
        hpn::Instance raw_inst{raw.raw_coords};
        const auto best_raw = hpn::brute_force_optimal(raw_inst);
        const auto best_norm = hpn::brute_force_optimal(norm.instance);
        CHECK(best_raw.order == best_norm.order);
        CHECK(hpn::denormalize_length(norm, best_norm.length) ==
              Catch::Approx(best_raw.length).epsilon(1e-6));
    }
}
