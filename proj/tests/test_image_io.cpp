#include <stdexcept>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "fga/image_io.hpp"
#include "fga/tensor.hpp"

using namespace fga;
namespace fs = std::filesystem;

static fs::path tmp_dir() {
    fs::path d = fs::temp_directory_path() / "fga_io_test";
    fs::create_directories(d);
    return d;
}

TEST_CASE("ppm roundtrip is lossless for 8-bit data") {
    Tensor img(4, 5, 3);
    Rng rng(21);
    for (double& v : img.data) v = double(rng.uniform_int(0, 255));
    fs::path p = tmp_dir() / "rt.ppm";
    write_ppm(p.string(), img);
    Tensor back = read_ppm(p.string());
    CHECK(back.same_shape(img));
    CHECK(max_abs_diff(back, img) == 0.0);
}

TEST_CASE("ppm write rounds to nearest and clamps") {
    Tensor img(1, 4, 3, 0.0);
    img.at(0, 0, 0) = 127.6;
    img.at(0, 1, 0) = -13.0;
    img.at(0, 2, 0) = 300.0;
    img.at(0, 3, 0) = 64.4;
    fs::path p = tmp_dir() / "round.ppm";
    write_ppm(p.string(), img);
    Tensor back = read_ppm(p.string());
    CHECK(back.at(0, 0, 0) == 128.0);
    CHECK(back.at(0, 1, 0) == 0.0);
    CHECK(back.at(0, 2, 0) == 255.0);
    CHECK(back.at(0, 3, 0) == 64.0);
}

TEST_CASE("pgm roundtrip and channel checks") {
    Tensor grey(3, 3, 1);
    for (int i = 0; i < 9; ++i) grey.data[i] = i * 20;
    fs::path p = tmp_dir() / "rt.pgm";
    write_pgm(p.string(), grey);
    CHECK(max_abs_diff(read_pgm(p.string()), grey) == 0.0);

    Tensor rgb(2, 2, 3, 1.0);
    CHECK_THROWS_AS(write_pgm((tmp_dir() / "x.pgm").string(), rgb), std::invalid_argument);
    CHECK_THROWS_AS(write_ppm((tmp_dir() / "x.ppm").string(), grey), std::invalid_argument);
}

TEST_CASE("read_image dispatches on magic") {
    Tensor rgb(2, 2, 3, 9.0), grey(2, 2, 1, 4.0);
    fs::path pp = tmp_dir() / "m.ppm", pg = tmp_dir() / "m.pgm";
    write_ppm(pp.string(), rgb);
    write_pgm(pg.string(), grey);
    CHECK(read_image(pp.string()).c == 3);
    CHECK(read_image(pg.string()).c == 1);
}

TEST_CASE("ppm reader handles comments and rejects bad headers") {
    fs::path p = tmp_dir() / "comment.ppm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P6\n# a comment line\n2 1\n# another\n255\n";
        unsigned char px[6] = {1, 2, 3, 4, 5, 6};
        f.write(reinterpret_cast<char*>(px), 6);
    }
    Tensor t = read_ppm(p.string());
    CHECK(t.h == 1);
    CHECK(t.w == 2);
    CHECK(t.at(0, 1, 2) == 6.0);

    fs::path bad = tmp_dir() / "bad.ppm";
    {
        std::ofstream f(bad, std::ios::binary);
        f << "P3\n2 1\n255\n1 2 3 4 5 6\n";   // ASCII variant unsupported
    }
    CHECK_THROWS(read_ppm(bad.string()));

    fs::path badmax = tmp_dir() / "badmax.ppm";
    {
        std::ofstream f(badmax, std::ios::binary);
        f << "P6\n2 1\n65535\n";
        unsigned char px[6] = {0, 0, 0, 0, 0, 0};
        f.write(reinterpret_cast<char*>(px), 6);
    }
    CHECK_THROWS(read_ppm(badmax.string()));

    CHECK_THROWS(read_ppm((tmp_dir() / "missing.ppm").string()));
}

TEST_CASE("atns roundtrip preserves float32 tensors of any channel count") {
    Tensor t(3, 2, 5);
    Rng rng(33);
    for (double& v : t.data) v = rng.uniform(-100.0, 100.0);
    fs::path p = tmp_dir() / "t.atns";
    write_atns(p.string(), t);
    Tensor back = read_atns(p.string());
    CHECK(back.same_shape(t));
    // float32 storage: exact for values already representable, 1e-5 rel else
    CHECK(max_abs_diff(back, t) < 1e-4);
    for (size_t e = 0; e < t.data.size(); ++e)
        CHECK(back.data[e] == doctest::Approx(t.data[e]).epsilon(1e-6));
}

TEST_CASE("atns rejects foreign magic") {
    fs::path p = tmp_dir() / "bad.atns";
    {
        std::ofstream f(p, std::ios::binary);
        f << "NOPE";
        uint32_t dims[3] = {1, 1, 1};
        f.write(reinterpret_cast<char*>(dims), 12);
        float z = 0.0f;
        f.write(reinterpret_cast<char*>(&z), 4);
    }
    CHECK_THROWS(read_atns(p.string()));
}
