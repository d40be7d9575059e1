#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "hgin/pnm.hpp"
#include "hgin/rng.hpp"
#include "hgin/synth.hpp"
#include "hgin/tensor.hpp"

using namespace hgin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("hgin_io_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_raw(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("pnm round-trip is exact on representable values") {
    TempDir td("exact");
    Tensor64 img({2, 3, 3});
    const double vals[] = {0.0, 128.0 / 255.0, 1.0};
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = vals[i % 3];
    write_pnm(td.file("a.ppm"), img);
    Tensor64 back = read_pnm(td.file("a.ppm"));
    REQUIRE(back.shape() == img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);
}

TEST_CASE("pnm quantization error is bounded by 1/510") {
    TempDir td("quant");
    Tensor64 img({9, 7, 3});
    Rng r(5);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = r.uniform01();
    write_pnm(td.file("q.ppm"), img);
    Tensor64 back = read_pnm(td.file("q.ppm"));
    for (std::int64_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back[i] - img[i]) <= 1.0 / 510.0);
}

TEST_CASE("gray byte 128 reads as 128/255") {
    TempDir td("mid");
    write_raw(td.file("g.pgm"), std::string("P5\n1 1\n255\n") + static_cast<char>(128));
    Tensor64 img = read_pnm(td.file("g.pgm"));
    REQUIRE(img.shape() == std::vector<int>{1, 1, 1});
    CHECK(img[0] == 128.0 / 255.0);
    CHECK(img[0] == doctest::Approx(0.50196).epsilon(1e-4));
}

TEST_CASE("pnm header variants and failures") {
    TempDir td("hdr");

    // comments inside the header are legal
    std::string body(4, static_cast<char>(7));
    write_raw(td.file("c.pgm"), "P5\n# a comment\n2 2 # trailing\n255\n" + body);
    CHECK(read_pnm(td.file("c.pgm")).shape() == std::vector<int>{2, 2, 1});

    write_raw(td.file("p4.pbm"), "P4\n2 2\n");
    CHECK_THROWS_WITH_AS(read_pnm(td.file("p4.pbm")), doctest::Contains("magic"),
                         std::runtime_error);

    write_raw(td.file("wide.ppm"), "P6\n2 2\n65535\n" + std::string(24, 'x'));
    CHECK_THROWS_WITH_AS(read_pnm(td.file("wide.ppm")),
                         doctest::Contains("unsupported maxval"), std::runtime_error);

    write_raw(td.file("short.ppm"), "P6\n4 4\n255\n" + std::string(10, 'x'));
    CHECK_THROWS_WITH_AS(read_pnm(td.file("short.ppm")), doctest::Contains("truncated"),
                         std::runtime_error);

    write_raw(td.file("junk.ppm"), "P6\nzz\n255\n");
    CHECK_THROWS_WITH_AS(read_pnm(td.file("junk.ppm")), doctest::Contains("malformed"),
                         std::runtime_error);

    CHECK_THROWS_AS(read_pnm(td.file("missing.ppm")), std::runtime_error);
}

TEST_CASE("write_pnm picks the magic from the channel count") {
    TempDir td("magic");
    write_pnm(td.file("g.pgm"), Tensor64::full({3, 4, 1}, 0.5));
    write_pnm(td.file("g2.pgm"), Tensor64::full({3, 4}, 0.5));
    write_pnm(td.file("c.ppm"), Tensor64::full({3, 4, 3}, 0.5));
    std::ifstream g(td.file("g.pgm"), std::ios::binary), g2(td.file("g2.pgm"), std::ios::binary),
        c(td.file("c.ppm"), std::ios::binary);
    std::string mg, mg2, mc;
    g >> mg;
    g2 >> mg2;
    c >> mc;
    CHECK(mg == "P5");
    CHECK(mg2 == "P5");
    CHECK(mc == "P6");

    CHECK_THROWS_AS(write_pnm(td.file("bad.ppm"), Tensor64::full({3, 4, 2}, 0.5)),
                    std::invalid_argument);
    Tensor64 nan_img = Tensor64::full({2, 2, 1}, 0.5);
    nan_img[1] = std::nan("");
    CHECK_THROWS_AS(write_pnm(td.file("nan.pgm"), nan_img), std::invalid_argument);
}

TEST_CASE("out-of-range pixels clamp on write") {
    TempDir td("clamp");
    Tensor64 img({1, 2, 1});
    img[0] = -0.3;
    img[1] = 1.7;
    write_pnm(td.file("c.pgm"), img);
    Tensor64 back = read_pnm(td.file("c.pgm"));
    CHECK(back[0] == 0.0);
    CHECK(back[1] == 1.0);
}

TEST_CASE("mask read thresholds at byte 128") {
    TempDir td("mask");
    std::string body;
    for (int b : {0, 127, 128, 255}) body.push_back(static_cast<char>(b));
    write_raw(td.file("m.pgm"), "P5\n2 2\n255\n" + body);
    Tensor64 m = read_mask_pgm(td.file("m.pgm"));
    CHECK(m[0] == 0.0);
    CHECK(m[1] == 0.0);
    CHECK(m[2] == 1.0);
    CHECK(m[3] == 1.0);

    // binary masks survive a write/read cycle exactly
    write_pnm(td.file("m2.pgm"), m);
    Tensor64 back = read_mask_pgm(td.file("m2.pgm"));
    for (int i = 0; i < 4; ++i) CHECK(back[i] == m[i]);

    write_raw(td.file("rgb.ppm"), "P6\n1 1\n255\nabc");
    CHECK_THROWS_WITH_AS(read_mask_pgm(td.file("rgb.ppm")),
                         doctest::Contains("single-channel"), std::runtime_error);
}

TEST_CASE("synth images are deterministic and span the unit range") {
    Tensor64 a = synth_image(32, 9001);
    Tensor64 b = synth_image(32, 9001);
    for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    Tensor64 c = synth_image(32, 9002);
    bool differs = false;
    for (std::int64_t i = 0; i < a.size(); ++i) differs = differs || a[i] != c[i];
    CHECK(differs);

    double lo = 1.0, hi = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        lo = std::min(lo, a[i]);
        hi = std::max(hi, a[i]);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

TEST_CASE("synth corpus writes a readable, non-degenerate image set") {
    TempDir td("corpus");
    const auto start = std::chrono::steady_clock::now();
    write_synth_corpus(td.path.string(), 100, 32, 7);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 5.0);

    auto names = list_files(td.path.string(), {".ppm"});
    REQUIRE(names.size() == 100);
    CHECK(names.front() == "img_0000.ppm");
    CHECK(names.back() == "img_0099.ppm");

    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
    for (int k = 0; k < 20; ++k) {
        Tensor64 img = read_pnm((td.path / names[static_cast<std::size_t>(k)]).string());
        REQUIRE(img.shape() == std::vector<int>{32, 32, 3});
        for (std::int64_t i = 0; i < img.size(); ++i) {
            sum += img[i];
            sum2 += img[i] * img[i];
            ++n;
        }
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sum2 / n - mean * mean);
    CHECK(mean > 0.15);
    CHECK(mean < 0.85);
    CHECK(stddev > 0.12);  // degenerate corpora would flatline here
}

TEST_CASE("list_files filters and sorts") {
    TempDir td("list");
    write_pnm(td.file("b.ppm"), Tensor64::full({2, 2, 3}, 0.1));
    write_pnm(td.file("a.ppm"), Tensor64::full({2, 2, 3}, 0.2));
    write_raw(td.file("notes.txt"), "x");
    auto names = list_files(td.path.string(), {".ppm", ".pgm"});
    REQUIRE(names.size() == 2);
    CHECK(names[0] == "a.ppm");
    CHECK(names[1] == "b.ppm");
    CHECK_THROWS_AS(list_files(td.file("nope"), {".ppm"}), std::runtime_error);
}

TEST_CASE("augmentation transforms are exact permutations") {
    Tensor64 img({3, 4, 2});
    Rng r(88);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = r.uniform01();

    Tensor64 f = flip_horizontal(img);
    CHECK(f.at(1, 0, 1) == img.at(1, 3, 1));
    Tensor64 ff = flip_horizontal(f);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(ff[i] == img[i]);

    Tensor64 r1 = rotate90(img, 1);
    REQUIRE(r1.shape() == std::vector<int>{4, 3, 2});
    CHECK(r1.at(4 - 1 - 2, 1, 0) == img.at(1, 2, 0));

    Tensor64 r4 = rotate90(img, 4);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(r4[i] == img[i]);
    Tensor64 rneg = rotate90(rotate90(img, 3), 1);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(rneg[i] == img[i]);
}
