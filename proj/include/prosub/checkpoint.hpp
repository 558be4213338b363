#pragma once

#include <string>

#include "prosub/mlp.hpp"

namespace prosub {

// Versioned little-endian binary: header {format_version u32, layer_count u32},
// then per layer {in u64, out u64, activation tag u32, dropout f64,
// weights f64[in*out] row-major, bias f64[out]}.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace prosub
