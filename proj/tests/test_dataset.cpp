#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fga/dataset.hpp"
#include "fga/image_io.hpp"

using namespace fga;
namespace fs = std::filesystem;

TEST_CASE("synthetic dataset is deterministic and well-formed") {
    Dataset a = generate_synthetic_dataset(3, 10, 16, 2.0, 40.0, 99);
    Dataset b = generate_synthetic_dataset(3, 10, 16, 2.0, 40.0, 99);
    REQUIRE(a.size() == 30);
    CHECK(a.num_classes == 3);
    bool identical = true;
    for (size_t i = 0; i < a.size(); ++i) {
        identical = identical && (a.labels[i] == b.labels[i]) &&
                    (max_abs_diff(a.images[i], b.images[i]) == 0.0);
    }
    CHECK(identical);

    Dataset c = generate_synthetic_dataset(3, 10, 16, 2.0, 40.0, 100);
    bool differs = false;
    for (size_t i = 0; i < a.size(); ++i)
        differs = differs || max_abs_diff(a.images[i], c.images[i]) > 0.0;
    CHECK(differs);

    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.labels[i] >= 0);
        CHECK(a.labels[i] < 3);
        for (double v : a.images[i].data) {
            CHECK(v >= 0.0);
            CHECK(v <= 255.0);
            CHECK(v == std::nearbyint(v));   // integer-valued pixels
        }
    }
}

TEST_CASE("split sizes follow the per-class rule") {
    // per_class=12: 6 train, 2 held-out, 4 attack-pool per class
    Dataset ds = generate_synthetic_dataset(3, 12, 16, 1.0, 40.0, 5);
    CHECK(ds.indices(SplitTag::Train).size() == 18);
    CHECK(ds.indices(SplitTag::HeldOut).size() == 6);
    CHECK(ds.indices(SplitTag::AttackPool).size() == 12);

    // minimal dataset: one image per class goes to train
    Dataset tiny = generate_synthetic_dataset(2, 1, 8, 0.0, 40.0, 5);
    REQUIRE(tiny.size() == 2);
    CHECK(tiny.labels[0] != tiny.labels[1]);
    CHECK((tiny.labels[0] == 0 || tiny.labels[0] == 1));
    CHECK(tiny.indices(SplitTag::Train).size() == 2);
}

TEST_CASE("directory roundtrip is lossless") {
    Dataset ds = generate_synthetic_dataset(2, 6, 12, 3.0, 45.0, 17);
    fs::path dir = fs::temp_directory_path() / "fga_ds_rt";
    fs::remove_all(dir);
    write_dataset_dir(ds, dir.string());
    Dataset back = load_dataset_dir(dir.string());
    REQUIRE(back.size() == ds.size());
    CHECK(back.num_classes == ds.num_classes);
    for (size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.labels[i] == ds.labels[i]);
        CHECK(back.split[i] == ds.split[i]);
        CHECK(max_abs_diff(back.images[i], ds.images[i]) == 0.0);
    }
}

TEST_CASE("directory loader rejects broken inputs") {
    fs::path dir = fs::temp_directory_path() / "fga_ds_bad";
    fs::remove_all(dir);
    fs::create_directories(dir);

    CHECK_THROWS(load_dataset_dir(dir.string()));   // no labels.csv

    Tensor img(4, 4, 3, 10.0);
    write_ppm((dir / "img_00000.ppm").string(), img);
    {
        std::ofstream f(dir / "labels.csv");
        f << "filename,label\nimg_00000.ppm,-1\n";
    }
    CHECK_THROWS(load_dataset_dir(dir.string()));   // label out of range

    {
        std::ofstream f(dir / "labels.csv");
        f << "filename,label\nimg_00000.ppm,0\nimg_00001.ppm,1\n";
    }
    CHECK_THROWS(load_dataset_dir(dir.string()));   // file named but missing

    write_ppm((dir / "img_00001.ppm").string(), Tensor(5, 5, 3, 1.0));
    CHECK_THROWS(load_dataset_dir(dir.string()));   // shape inconsistency
}
