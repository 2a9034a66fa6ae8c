#ifndef MCAF_PIPELINE_HPP
#define MCAF_PIPELINE_HPP

#include <string>
#include <utility>
#include <vector>

#include "mcaf/dcp.hpp"
#include "mcaf/grading.hpp"
#include "mcaf/image.hpp"

// Dataset plumbing: coordinate-based cropping, fixed-size tiling and manifest
// construction (per-pair haze grading plus a stratified split).

namespace mcaf {

// Crop the sub-raster covering `region`, using the linear lon/lat -> pixel
// map implied by `meta`. Pixel edges are floors of the mapped coordinates;
// the result carries recomputed geo metadata.
Image geo_crop(const Image& img, const GeoMeta& meta, const GeoMeta& region);

struct TileRef {
    Image tile;
    int64_t row = 0, col = 0; // pixel origin, multiples of the tile size
};

// Non-overlapping row-major grid; partial edge tiles are dropped.
std::vector<TileRef> tile_image(const Image& img, int tile = 256);

struct ManifestRecord {
    std::string hazy;
    std::string clear;
    double mdc = 0; // mean dark channel, 0-255
    HazeClass haze_class = HazeClass::thin;
    Split split = Split::train;
    int64_t row = 0, col = 0;
};

struct Manifest {
    std::vector<ManifestRecord> records;     // sorted by hazy path
    std::vector<std::string> exceptions;     // unmatched or unreadable files
};

struct ManifestConfig {
    int patch_radius = 7;
    std::pair<double, double> thresholds = kDefaultHazeThresholds;
    uint64_t seed = 0;
    double train_ratio = 0.8;
    double test_ratio = 0.1;
};

// Pairs files by name across the two directories, grades each hazy image and
// assigns stratified splits. Unmatched names are reported, not fatal.
Manifest build_manifest(const std::string& hazy_dir, const std::string& clear_dir,
                        const ManifestConfig& cfg);

// One JSON object per line, keys {hazy, clear, mdc, class, split, row, col}.
std::string manifest_to_jsonl(const Manifest& m);
Manifest manifest_from_jsonl(const std::string& text);

// Atomic write (temp + rename).
void save_manifest(const Manifest& m, const std::string& path);

} // namespace mcaf

#endif
