#ifndef MCAF_WEIGHTS_HPP
#define MCAF_WEIGHTS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mcaf/params.hpp"

// Binary tensor container, bit-exact:
//   magic "MCAF" | format version u32 LE | tensor count u32 LE
//   per tensor: name length u16 LE, UTF-8 name, rank u8, dims u32 LE each,
//               raw f32 LE payload.
// Files are written to a temporary sibling and renamed into place so a failed
// write never leaves a partial file.

namespace mcaf {

inline constexpr uint32_t kWeightFormatVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;

    int64_t numel() const {
        int64_t n = 1;
        for (uint32_t d : dims) n *= d;
        return dims.empty() ? 0 : n;
    }
};

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

int64_t serialized_element_count(const std::vector<NamedTensor>& tensors);

// ParamStore adapters. Loading validates that names, order and shapes match
// the destination store exactly.
std::vector<NamedTensor> params_to_tensors(const ParamStore& ps);
void save_params(const std::string& path, const ParamStore& ps);
void load_params_into(const std::string& path, ParamStore& ps);

} // namespace mcaf

#endif
