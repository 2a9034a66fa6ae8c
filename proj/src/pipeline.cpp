#include "mcaf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mcaf/rng.hpp"

namespace fs = std::filesystem;

namespace mcaf {

Image geo_crop(const Image& img, const GeoMeta& meta, const GeoMeta& region) {
    meta.validate();
    region.validate();
    if (region.tl_lon < meta.tl_lon || region.br_lon > meta.br_lon || region.tl_lat > meta.tl_lat ||
        region.br_lat < meta.br_lat)
        throw RangeError("geo_crop: region outside raster bounds");

    const double lon_span = meta.br_lon - meta.tl_lon;
    const double lat_span = meta.tl_lat - meta.br_lat;
    auto col_of = [&](double lon) {
        return static_cast<int64_t>(std::floor((lon - meta.tl_lon) / lon_span * static_cast<double>(img.w)));
    };
    auto row_of = [&](double lat) {
        return static_cast<int64_t>(std::floor((meta.tl_lat - lat) / lat_span * static_cast<double>(img.h)));
    };

    const int64_t c0 = std::clamp<int64_t>(col_of(region.tl_lon), 0, img.w);
    const int64_t c1 = std::clamp<int64_t>(col_of(region.br_lon), 0, img.w);
    const int64_t r0 = std::clamp<int64_t>(row_of(region.tl_lat), 0, img.h);
    const int64_t r1 = std::clamp<int64_t>(row_of(region.br_lat), 0, img.h);
    if (c1 <= c0 || r1 <= r0) throw RangeError("geo_crop: zero-area region");

    Image out(r1 - r0, c1 - c0);
    for (int64_t y = r0; y < r1; ++y)
        for (int64_t x = c0; x < c1; ++x)
            for (int c = 0; c < 3; ++c) out.at(y - r0, x - c0, c) = img.at(y, x, c);

    GeoMeta g;
    g.tl_lon = meta.tl_lon + lon_span * static_cast<double>(c0) / static_cast<double>(img.w);
    g.br_lon = meta.tl_lon + lon_span * static_cast<double>(c1) / static_cast<double>(img.w);
    g.tl_lat = meta.tl_lat - lat_span * static_cast<double>(r0) / static_cast<double>(img.h);
    g.br_lat = meta.tl_lat - lat_span * static_cast<double>(r1) / static_cast<double>(img.h);
    out.geo = g;
    return out;
}

std::vector<TileRef> tile_image(const Image& img, int tile) {
    if (tile < 1) throw RangeError("tile_image: tile size must be >= 1");
    std::vector<TileRef> out;
    for (int64_t y = 0; y + tile <= img.h; y += tile)
        for (int64_t x = 0; x + tile <= img.w; x += tile) {
            TileRef t;
            t.row = y;
            t.col = x;
            t.tile = Image(tile, tile);
            for (int64_t j = 0; j < tile; ++j)
                for (int64_t i = 0; i < tile; ++i)
                    for (int c = 0; c < 3; ++c) t.tile.at(j, i, c) = img.at(y + j, x + i, c);
            out.push_back(std::move(t));
        }
    return out;
}

namespace {

std::map<std::string, std::string> list_images(const std::string& dir) {
    std::map<std::string, std::string> out; // filename -> full path, sorted by name
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".ppm") out[e.path().filename().string()] = e.path().string();
    }
    return out;
}

} // namespace

Manifest build_manifest(const std::string& hazy_dir, const std::string& clear_dir,
                        const ManifestConfig& cfg) {
    Manifest m;
    const auto hazy = list_images(hazy_dir);
    const auto clear = list_images(clear_dir);

    for (const auto& [name, path] : hazy)
        if (!clear.count(name)) m.exceptions.push_back("hazy without clear counterpart: " + path);
    for (const auto& [name, path] : clear)
        if (!hazy.count(name)) m.exceptions.push_back("clear without hazy counterpart: " + path);

    for (const auto& [name, path] : hazy) {
        auto it = clear.find(name);
        if (it == clear.end()) continue;
        ManifestRecord rec;
        rec.hazy = path;
        rec.clear = it->second;
        try {
            const Image img = load_image(path);
            rec.mdc = haze_density(img, cfg.patch_radius);
        } catch (const IoError& e) {
            m.exceptions.push_back(e.what());
            continue;
        }
        rec.haze_class = classify_haze(rec.mdc, cfg.thresholds);
        m.records.push_back(std::move(rec));
    }

    // records are already sorted by filename (map order); assign splits per class
    std::vector<int> class_of;
    class_of.reserve(m.records.size());
    for (const auto& r : m.records) class_of.push_back(static_cast<int>(r.haze_class));
    const std::vector<Split> splits = stratified_split(class_of, cfg.seed, cfg.train_ratio, cfg.test_ratio);
    for (size_t i = 0; i < m.records.size(); ++i) m.records[i].split = splits[i];
    return m;
}

std::string manifest_to_jsonl(const Manifest& m) {
    std::ostringstream os;
    for (const auto& r : m.records) {
        nlohmann::json j;
        j["hazy"] = r.hazy;
        j["clear"] = r.clear;
        j["mdc"] = r.mdc;
        j["class"] = to_string(r.haze_class);
        j["split"] = to_string(r.split);
        j["row"] = r.row;
        j["col"] = r.col;
        os << j.dump() << "\n";
    }
    return os.str();
}

Manifest manifest_from_jsonl(const std::string& text) {
    Manifest m;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(std::string("malformed manifest line: ") + e.what());
        }
        ManifestRecord r;
        r.hazy = j.at("hazy").get<std::string>();
        r.clear = j.at("clear").get<std::string>();
        r.mdc = j.at("mdc").get<double>();
        r.haze_class = haze_class_from_string(j.at("class").get<std::string>());
        const std::string split = j.at("split").get<std::string>();
        r.split = split == "train" ? Split::train : split == "test" ? Split::test : Split::val;
        r.row = j.at("row").get<int64_t>();
        r.col = j.at("col").get<int64_t>();
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp);
        const std::string text = manifest_to_jsonl(m);
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!f) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

} // namespace mcaf
