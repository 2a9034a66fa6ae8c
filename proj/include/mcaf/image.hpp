#ifndef MCAF_IMAGE_HPP
#define MCAF_IMAGE_HPP

#include <optional>
#include <string>
#include <vector>

#include "mcaf/tensor.hpp"

namespace mcaf {

// Geographic extent of a raster: top-left and bottom-right corners in
// (longitude, latitude). Longitude grows to the right, latitude shrinks
// downward.
struct GeoMeta {
    double tl_lon = 0, tl_lat = 0;
    double br_lon = 0, br_lat = 0;

    void validate() const {
        if (!(tl_lon < br_lon) || !(tl_lat > br_lat))
            throw RangeError("geo metadata must satisfy tl_lon < br_lon and tl_lat > br_lat");
    }
};

// Decoded 3-channel raster with values in [0, 1], interleaved RGB rows.
struct Image {
    int64_t h = 0, w = 0;
    std::vector<float> data;
    std::optional<GeoMeta> geo;

    Image() = default;
    Image(int64_t h_, int64_t w_) : h(h_), w(w_), data(static_cast<size_t>(h_ * w_ * 3), 0.0f) {}

    float& at(int64_t y, int64_t x, int64_t c) { return data[static_cast<size_t>((y * w + x) * 3 + c)]; }
    const float& at(int64_t y, int64_t x, int64_t c) const {
        return data[static_cast<size_t>((y * w + x) * 3 + c)];
    }
    int64_t pixels() const { return h * w; }
};

// PNG (8-bit RGB) and binary PPM; the format is sniffed from the file magic
// on load and chosen by extension on save. Round trips of 8-bit data are
// lossless.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

// JSON sidecar {"tl": [lon, lat], "br": [lon, lat]}.
GeoMeta load_geo_sidecar(const std::string& path);
void save_geo_sidecar(const GeoMeta& geo, const std::string& path);

Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

inline uint8_t to_u8(float v) {
    const float c = std::min(std::max(v, 0.0f), 1.0f);
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

} // namespace mcaf

#endif
