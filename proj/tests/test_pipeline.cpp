#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>

#include "mcaf/pipeline.hpp"
#include "test_support.hpp"

using namespace mcaf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("mcaf_" + tag + "_" + "tmp");
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

Image random_image(Rng& rng, int64_t h, int64_t w) {
    Image img(h, w);
    for (float& v : img.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    return img;
}

// quantize like the writers do, so round trips compare exactly
Image quantized(const Image& img) {
    Image q = img;
    for (float& v : q.data) v = static_cast<float>(to_u8(v)) / 255.0f;
    return q;
}

Image constant_image(int64_t h, int64_t w, float r, float g, float b) {
    Image img(h, w);
    for (int64_t i = 0; i < img.pixels(); ++i) {
        img.data[static_cast<size_t>(3 * i)] = r;
        img.data[static_cast<size_t>(3 * i + 1)] = g;
        img.data[static_cast<size_t>(3 * i + 2)] = b;
    }
    return img;
}

} // namespace

TEST_CASE("png round trip preserves 8-bit data exactly") {
    TempDir dir("png");
    Rng rng(110);
    const Image img = quantized(random_image(rng, 21, 17));
    const std::string path = (dir.path / "t.png").string();
    save_image(img, path);
    const Image back = load_image(path);
    REQUIRE(back.h == img.h);
    REQUIRE(back.w == img.w);
    CHECK(back.data == img.data);
}

TEST_CASE("ppm round trip preserves 8-bit data exactly") {
    TempDir dir("ppm");
    Rng rng(111);
    const Image img = quantized(random_image(rng, 16, 16));
    const std::string path = (dir.path / "t.ppm").string();
    save_image(img, path);
    const Image back = load_image(path);
    CHECK(back.data == img.data);
}

TEST_CASE("ppm header parsing with comments") {
    TempDir dir("ppmhdr");
    const std::string path = (dir.path / "h.ppm").string();
    {
        std::ofstream f(path, std::ios::binary);
        f << "P6\n# a comment\n16 16\n255\n";
        std::vector<char> px(16 * 16 * 3, '\x40');
        f.write(px.data(), static_cast<std::streamsize>(px.size()));
    }
    const Image img = load_image(path);
    CHECK(img.h == 16);
    CHECK(img.w == 16);
    CHECK(img.at(0, 0, 0) == doctest::Approx(64.0 / 255.0));
}

TEST_CASE("malformed magic bytes raise a typed io error") {
    TempDir dir("magic");
    const std::string path = (dir.path / "bad.png").string();
    {
        std::ofstream f(path, std::ios::binary);
        f << "not an image at all";
    }
    CHECK_THROWS_AS(load_image(path), IoError);
    CHECK_THROWS_AS(load_image((dir.path / "missing.png").string()), IoError);
}

TEST_CASE("geo sidecar round trip") {
    TempDir dir("geo");
    GeoMeta g{100.0, 40.0, 101.0, 39.0};
    const std::string path = (dir.path / "g.json").string();
    save_geo_sidecar(g, path);
    const GeoMeta back = load_geo_sidecar(path);
    CHECK(back.tl_lon == g.tl_lon);
    CHECK(back.br_lat == g.br_lat);
}

TEST_CASE("geo_crop with the full extent is the identity") {
    Rng rng(112);
    Image img = random_image(rng, 20, 30);
    const GeoMeta meta{100.0, 40.0, 101.0, 39.0};
    const Image out = geo_crop(img, meta, meta);
    CHECK(out.h == img.h);
    CHECK(out.w == img.w);
    CHECK(out.data == img.data);
    REQUIRE(out.geo.has_value());
    CHECK(out.geo->tl_lon == doctest::Approx(meta.tl_lon));
    CHECK(out.geo->br_lat == doctest::Approx(meta.br_lat));
}

TEST_CASE("geo_crop maps longitudes to the documented column range") {
    Rng rng(113);
    Image img = random_image(rng, 4, 1000);
    const GeoMeta meta{100.0, 40.0, 101.0, 39.0};
    const GeoMeta region{100.25, 40.0, 100.75, 39.0};
    const Image out = geo_crop(img, meta, region);
    CHECK(out.w == 500); // columns 250..749
    CHECK(out.h == 4);
    for (int64_t x = 0; x < out.w; ++x) CHECK(out.at(0, x, 0) == img.at(0, 250 + x, 0));
}

TEST_CASE("geo_crop rejects out-of-bounds and zero-area regions") {
    Image img(10, 10);
    const GeoMeta meta{100.0, 40.0, 101.0, 39.0};
    CHECK_THROWS_AS(geo_crop(img, meta, GeoMeta{99.5, 40.0, 100.5, 39.0}), RangeError);
    CHECK_THROWS_AS(geo_crop(img, meta, GeoMeta{100.5, 39.5, 100.5001, 39.4999}), RangeError);
}

TEST_CASE("geo_crop composes within integer flooring") {
    Rng rng(114);
    Image img = random_image(rng, 100, 100);
    const GeoMeta meta{10.0, 50.0, 11.0, 49.0};
    const GeoMeta mid{10.2, 49.9, 10.9, 49.2};
    const GeoMeta inner{10.4, 49.7, 10.8, 49.4};

    const Image two_step = geo_crop(geo_crop(img, meta, mid), *geo_crop(img, meta, mid).geo, inner);
    const Image one_step = geo_crop(img, meta, inner);
    CHECK(std::abs(two_step.h - one_step.h) <= 1);
    CHECK(std::abs(two_step.w - one_step.w) <= 1);
}

TEST_CASE("tile_image produces the exact grid and drops partial tiles") {
    Rng rng(115);
    const Image img = random_image(rng, 512, 512);
    const auto tiles = tile_image(img, 256);
    REQUIRE(tiles.size() == 4);
    CHECK(tiles[0].row == 0);
    CHECK(tiles[0].col == 0);
    CHECK(tiles[1].row == 0);
    CHECK(tiles[1].col == 256);
    CHECK(tiles[2].row == 256);
    CHECK(tiles[2].col == 0);
    CHECK(tiles[3].row == 256);
    CHECK(tiles[3].col == 256);

    const Image odd = random_image(rng, 300, 300);
    CHECK(tile_image(odd, 256).size() == 1);
}

TEST_CASE("tile count formula holds for random sizes") {
    Rng rng(116);
    for (int iter = 0; iter < 20; ++iter) {
        const int64_t h = 1 + static_cast<int64_t>(rng.below(200));
        const int64_t w = 1 + static_cast<int64_t>(rng.below(200));
        const int tile = 1 + static_cast<int>(rng.below(64));
        Image img(h, w);
        CHECK(static_cast<int64_t>(tile_image(img, tile).size()) == (h / tile) * (w / tile));
    }
}

TEST_CASE("reassembling the tiles of a divisible image reproduces it") {
    Rng rng(117);
    const Image img = random_image(rng, 64, 96);
    const auto tiles = tile_image(img, 32);
    Image rebuilt(64, 96);
    for (const TileRef& t : tiles)
        for (int64_t y = 0; y < t.tile.h; ++y)
            for (int64_t x = 0; x < t.tile.w; ++x)
                for (int c = 0; c < 3; ++c) rebuilt.at(t.row + y, t.col + x, c) = t.tile.at(y, x, c);
    CHECK(rebuilt.data == img.data);
}

TEST_CASE("build_manifest on empty directories yields an empty manifest") {
    TempDir hazy("mh"), clear("mc");
    const Manifest m = build_manifest(hazy.str(), clear.str(), ManifestConfig{});
    CHECK(m.records.empty());
    CHECK(m.exceptions.empty());
}

TEST_CASE("build_manifest grades pairs, reports orphans and is deterministic") {
    TempDir hazy("mh2"), clear("mc2");
    // densities: < 110.58 thin, inside band moderate, > 159.31 thick
    const float levels[] = {0.2f, 0.25f, 0.3f, 0.52f, 0.55f, 0.5f, 0.85f, 0.9f, 0.8f, 0.6f};
    for (int i = 0; i < 10; ++i) {
        const std::string name = "img" + std::to_string(i) + ".ppm";
        save_image(constant_image(16, 16, levels[i], levels[i], levels[i]), (hazy.path / name).string());
        save_image(constant_image(16, 16, 1.0f, 1.0f, 1.0f), (clear.path / name).string());
    }
    save_image(constant_image(16, 16, 0.5f, 0.5f, 0.5f), (hazy.path / "orphan.ppm").string());

    ManifestConfig cfg;
    cfg.seed = 7;
    const Manifest m = build_manifest(hazy.str(), clear.str(), cfg);
    REQUIRE(m.records.size() == 10);
    REQUIRE(m.exceptions.size() == 1);
    CHECK(m.exceptions[0].find("orphan") != std::string::npos);

    // classes match direct per-image recomputation
    int thin = 0, moderate = 0, thick = 0;
    for (const auto& r : m.records) {
        const Image img = load_image(r.hazy);
        CHECK(classify_haze(haze_density(img, cfg.patch_radius), cfg.thresholds) == r.haze_class);
        if (r.haze_class == HazeClass::thin) ++thin;
        if (r.haze_class == HazeClass::moderate) ++moderate;
        if (r.haze_class == HazeClass::thick) ++thick;
    }
    CHECK(thin == 3);
    CHECK(moderate == 4);
    CHECK(thick == 3);

    // per-class split counts obey the floor/floor/remainder rule
    std::map<HazeClass, std::map<Split, int64_t>> tally;
    for (const auto& r : m.records) tally[r.haze_class][r.split]++;
    for (const auto& [cls, by_split] : tally) {
        int64_t n = 0;
        for (const auto& [s, count] : by_split) n += count;
        const SplitCounts want = split_counts(n);
        auto get = [&](Split s) {
            auto it = by_split.find(s);
            return it == by_split.end() ? 0 : it->second;
        };
        CHECK(get(Split::train) == want.train);
        CHECK(get(Split::test) == want.test);
        CHECK(get(Split::val) == want.val);
    }

    // byte-identical across runs with the same seed
    const Manifest m2 = build_manifest(hazy.str(), clear.str(), cfg);
    CHECK(manifest_to_jsonl(m) == manifest_to_jsonl(m2));

    // jsonl round trip
    const Manifest parsed = manifest_from_jsonl(manifest_to_jsonl(m));
    REQUIRE(parsed.records.size() == m.records.size());
    CHECK(manifest_to_jsonl(parsed) == manifest_to_jsonl(m));

    // file write is atomic and byte-identical
    const std::string out1 = (hazy.path / "m1.jsonl").string();
    save_manifest(m, out1);
    std::ifstream f(out1, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(bytes == manifest_to_jsonl(m));

    // split keys present in each line
    CHECK(bytes.find("\"hazy\"") != std::string::npos);
    CHECK(bytes.find("\"clear\"") != std::string::npos);
    CHECK(bytes.find("\"mdc\"") != std::string::npos);
    CHECK(bytes.find("\"class\"") != std::string::npos);
    CHECK(bytes.find("\"split\"") != std::string::npos);
    CHECK(bytes.find("\"row\"") != std::string::npos);
    CHECK(bytes.find("\"col\"") != std::string::npos);
}
