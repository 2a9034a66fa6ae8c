#include "mcaf/weights.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace mcaf {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'A', 'F'};

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("weight file truncated: " + path);
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kWeightFormatVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        if (t.name.size() > 0xffff) throw IoError("tensor name too long: " + t.name);
        put_u16(out, static_cast<uint16_t>(t.name.size()));
        out.append(t.name);
        out.push_back(static_cast<char>(t.dims.size()));
        int64_t n = t.dims.empty() ? 0 : 1;
        for (uint32_t d : t.dims) {
            put_u32(out, d);
            n *= d;
        }
        if (n != static_cast<int64_t>(t.data.size()))
            throw IoError("tensor payload does not match dims: " + t.name);
        for (float v : t.data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf, 0, path};

    if (r.bytes(4) != std::string(kMagic, 4)) throw IoError("not a weight file (bad magic): " + path);
    const uint32_t version = r.u32();
    if (version != kWeightFormatVersion)
        throw IoError("unsupported weight format version " + std::to_string(version) + ": " + path);

    const uint32_t count = r.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const uint16_t len = r.u16();
        t.name = r.bytes(len);
        const uint8_t rank = r.u8();
        int64_t n = rank == 0 ? 0 : 1;
        for (uint8_t d = 0; d < rank; ++d) {
            t.dims.push_back(r.u32());
            n *= t.dims.back();
        }
        t.data.resize(static_cast<size_t>(n));
        for (int64_t k = 0; k < n; ++k) {
            const uint32_t bits = r.u32();
            std::memcpy(&t.data[static_cast<size_t>(k)], &bits, 4);
        }
        tensors.push_back(std::move(t));
    }
    if (r.pos != buf.size()) throw IoError("trailing bytes in weight file: " + path);
    return tensors;
}

int64_t serialized_element_count(const std::vector<NamedTensor>& tensors) {
    int64_t n = 0;
    for (const NamedTensor& t : tensors) n += t.numel();
    return n;
}

std::vector<NamedTensor> params_to_tensors(const ParamStore& ps) {
    std::vector<NamedTensor> out;
    out.reserve(ps.count());
    for (size_t i = 0; i < ps.count(); ++i) {
        const Tensor& v = ps.value_at(i);
        NamedTensor t;
        t.name = ps.names()[i];
        t.dims = {static_cast<uint32_t>(v.shape.b), static_cast<uint32_t>(v.shape.c),
                  static_cast<uint32_t>(v.shape.h), static_cast<uint32_t>(v.shape.w)};
        t.data = v.data;
        out.push_back(std::move(t));
    }
    return out;
}

void save_params(const std::string& path, const ParamStore& ps) {
    save_tensors(path, params_to_tensors(ps));
}

void load_params_into(const std::string& path, ParamStore& ps) {
    const std::vector<NamedTensor> tensors = load_tensors(path);
    if (tensors.size() != ps.count())
        throw IoError("weight file has " + std::to_string(tensors.size()) + " tensors, expected " +
                      std::to_string(ps.count()) + ": " + path);
    for (size_t i = 0; i < tensors.size(); ++i) {
        const NamedTensor& t = tensors[i];
        if (t.name != ps.names()[i]) throw IoError("unexpected tensor '" + t.name + "' in " + path);
        Tensor& dst = ps.value(t.name);
        if (t.numel() != dst.numel() || t.dims.size() != 4 ||
            static_cast<int64_t>(t.dims[0]) != dst.shape.b || static_cast<int64_t>(t.dims[1]) != dst.shape.c ||
            static_cast<int64_t>(t.dims[2]) != dst.shape.h || static_cast<int64_t>(t.dims[3]) != dst.shape.w)
            throw IoError("shape mismatch for tensor '" + t.name + "' in " + path);
        dst.data = t.data;
    }
}

} // namespace mcaf
