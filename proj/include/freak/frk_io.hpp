#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "freak/tensor.hpp"

namespace freak::frk {

// FRK1 array record, bit-exact:
//   magic "FRK1"
//   rank               u32 little-endian
//   dims[rank]         u32 little-endian each
//   payload            IEEE-754 binary32 little-endian, row-major
void write_array(std::ostream& os, const Tensor<float>& t);
Tensor<float> read_array(std::istream& is, const std::string& origin);

void save_array_file(const std::string& path, const Tensor<float>& t);
Tensor<float> load_array_file(const std::string& path);

// Checkpoint container:
//   magic "FRKC", version u32
//   config text block  (u32 length + bytes)
//   parameter count    u32
//   per parameter: name (u32 length + bytes) + FRK1 array record
struct NamedArray {
    std::string name;
    Tensor<float> data;
};

struct Checkpoint {
    std::string config_text;
    std::vector<NamedArray> params;
};

void save_checkpoint(const std::string& path, const std::string& config_text,
                     const std::vector<NamedArray>& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace freak::frk
