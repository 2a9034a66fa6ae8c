#include "mcaf/image.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mcaf {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Image load_png(const std::string& path, FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: allocation failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: allocation failed for " + path);
    }
    std::vector<uint8_t> interleaved;
    png_uint_32 w = 0, h = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed to decode " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    // normalize everything to 8-bit RGB
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    interleaved.resize(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = interleaved.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int64_t>(h), static_cast<int64_t>(w));
    for (size_t i = 0; i < interleaved.size(); ++i)
        img.data[i] = static_cast<float>(interleaved[i]) / 255.0f;
    return img;
}

void save_png(const Image& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: allocation failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: allocation failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to encode " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(img.w) * 3);
    for (int64_t y = 0; y < img.h; ++y) {
        for (int64_t x = 0; x < img.w; ++x)
            for (int64_t c = 0; c < 3; ++c) row[static_cast<size_t>(x * 3 + c)] = to_u8(img.at(y, x, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

int ppm_next_value(std::istream& in, const std::string& path) {
    // skips whitespace and '#' comments between header tokens
    while (true) {
        const int c = in.peek();
        if (c == EOF) throw IoError("ppm: truncated header in " + path);
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    in >> value;
    if (!in) throw IoError("ppm: malformed header in " + path);
    return value;
}

Image load_ppm(const std::string& path, std::istream& in) {
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6') throw IoError("ppm: bad magic in " + path);
    const int w = ppm_next_value(in, path);
    const int h = ppm_next_value(in, path);
    const int maxval = ppm_next_value(in, path);
    if (w < 1 || h < 1) throw IoError("ppm: bad dimensions in " + path);
    if (maxval != 255) throw IoError("ppm: only maxval 255 supported, " + path);
    in.get(); // single whitespace after maxval

    std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size()) throw IoError("ppm: truncated pixel data in " + path);

    Image img(h, w);
    for (size_t i = 0; i < raw.size(); ++i) img.data[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> raw(img.data.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = to_u8(img.data[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("ppm: write failed for " + path);
}

} // namespace

Image load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open: " + path);
    uint8_t magic[8] = {0};
    probe.read(reinterpret_cast<char*>(magic), 8);
    const std::streamsize got = probe.gcount();
    probe.close();

    static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) {
        FilePtr fp(std::fopen(path.c_str(), "rb"));
        if (!fp) throw IoError("cannot open: " + path);
        return load_png(path, fp.get());
    }
    if (got >= 2 && magic[0] == 'P' && magic[1] == '6') {
        std::ifstream in(path, std::ios::binary);
        return load_ppm(path, in);
    }
    throw IoError("unsupported image format (expected PNG or P6 PPM): " + path);
}

void save_image(const Image& img, const std::string& path) {
    if (img.h < 1 || img.w < 1) throw IoError("refusing to save empty image: " + path);
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".ppm")
        save_ppm(img, path);
    else if (ext == ".png" || ext.empty())
        save_png(img, path);
    else
        throw IoError("unsupported output format '" + ext + "': " + path);
}

GeoMeta load_geo_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open geo sidecar: " + path);
    nlohmann::json j;
    try {
        in >> j;
        GeoMeta g;
        g.tl_lon = j.at("tl").at(0).get<double>();
        g.tl_lat = j.at("tl").at(1).get<double>();
        g.br_lon = j.at("br").at(0).get<double>();
        g.br_lat = j.at("br").at(1).get<double>();
        g.validate();
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed geo sidecar " + path + ": " + e.what());
    }
}

void save_geo_sidecar(const GeoMeta& geo, const std::string& path) {
    nlohmann::json j;
    j["tl"] = {geo.tl_lon, geo.tl_lat};
    j["br"] = {geo.br_lon, geo.br_lat};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump() << "\n";
}

Tensor image_to_tensor(const Image& img) {
    Tensor t(Shape{1, 3, img.h, img.w});
    for (int64_t y = 0; y < img.h; ++y)
        for (int64_t x = 0; x < img.w; ++x)
            for (int64_t c = 0; c < 3; ++c) t.at(0, c, y, x) = img.at(y, x, c);
    return t;
}

Image tensor_to_image(const Tensor& t) {
    if (t.shape.b != 1 || t.shape.c != 3) throw ShapeError("tensor_to_image: expected (1,3,h,w), got " + t.shape.str());
    Image img(t.shape.h, t.shape.w);
    for (int64_t y = 0; y < t.shape.h; ++y)
        for (int64_t x = 0; x < t.shape.w; ++x)
            for (int64_t c = 0; c < 3; ++c) img.at(y, x, c) = t.at(0, c, y, x);
    return img;
}

} // namespace mcaf
