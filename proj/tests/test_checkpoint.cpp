#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "hpn/checkpoint.hpp"

TEST_CASE("checkpoint container round trip") {
    hpn::Checkpoint ck;
    ck.config_text = "{\"note\":\"round trip\"}";
    ck.entries.push_back({"a.W", {2, 3}, {1.0, -2.5, 3.25, 0.0, 1e-300, -7.75}});
    ck.entries.push_back({"a.b", {3}, {0.125, -0.5, 2.0}});
    ck.entries.push_back({"meta", {1}, {42.0}});

    const char* path = "ckpt_test.bin";
    save_checkpoint(path, ck);
    const auto back = hpn::load_checkpoint(path);

    CHECK(back.config_text == ck.config_text);
    REQUIRE(back.entries.size() == 3);
    for (std::size_t i = 0; i < ck.entries.size(); ++i) {
        CHECK(back.entries[i].name == ck.entries[i].name);
        CHECK(back.entries[i].dims == ck.entries[i].dims);
        CHECK(back.entries[i].values == ck.entries[i].values);  // bit-exact doubles
    }
    CHECK(back.find("a.b") != nullptr);
    CHECK(back.find("missing") == nullptr);

    SECTION("saving twice produces identical bytes") {
        const char* path2 = "ckpt_test2.bin";
        save_checkpoint(path2, ck);
        std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
        std::remove(path2);
    }

    SECTION("wrong magic rejected") {
        const char* bad = "ckpt_bad.bin";
        std::ofstream os(bad, std::ios::binary);
        os << "NOTACKPTfile";
        os.close();
        CHECK_THROWS_WITH(hpn::load_checkpoint(bad),
                          Catch::Matchers::ContainsSubstring("version-1"));
        std::remove(bad);
    }

    SECTION("truncated file rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const char* cut = "ckpt_cut.bin";
        std::ofstream os(cut, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        os.close();
        CHECK_THROWS_WITH(hpn::load_checkpoint(cut),
                          Catch::Matchers::ContainsSubstring("truncated"));
        std::remove(cut);
    }

    SECTION("inconsistent dims rejected on save") {
        hpn::Checkpoint broken;
        broken.entries.push_back({"x", {2, 2}, {1.0, 2.0}});
        CHECK_THROWS_WITH(save_checkpoint("ckpt_broken.bin", broken),
                          Catch::Matchers::ContainsSubstring("inconsistent"));
        std::remove("ckpt_broken.bin");
    }

    std::remove(path);
}

TEST_CASE("missing file reported") {
    CHECK_THROWS_WITH(hpn::load_checkpoint("no_such_file.ckpt"),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}
