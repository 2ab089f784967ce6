// Binary checkpoint formats. All scalars little-endian; doubles are 64-bit
// IEEE. Layouts:
//
// Parameter file ("SALPVEC1"):
//   magic[8], u32 n_weight_layers L, u32 layer_sizes[L+1],
//   f64 data[P] in flatten order (layer-major, column-major per layer).
//
// Belief file ("SALBLF1\0"):
//   magic[8], u32 L, u32 layer_sizes[L+1], u8 kind (0 iso, 1 kron, 2 delta),
//   f64 iso_precision, f64 tau, f64 alpha, f64 beta,
//   f64 mean[P], then when kron: per layer f64 A[(in+1)^2], f64 G[out^2],
//   column-major.
#pragma once

#include "streamal/belief.hpp"
#include "streamal/mlp.hpp"

#include <string>
#include <vector>

namespace streamal {

void save_params(const ParamVector& theta, const std::string& path);
ParamVector load_params(const std::string& path);

std::vector<unsigned char> serialize_belief(const GaussianBelief& belief);
GaussianBelief deserialize_belief(const std::vector<unsigned char>& bytes);

void save_belief(const GaussianBelief& belief, const std::string& path);
GaussianBelief load_belief(const std::string& path);

}  // namespace streamal
