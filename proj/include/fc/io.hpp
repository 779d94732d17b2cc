#pragma once

// Binary containers. Byte order is little-endian and normative.
//
//   FCWT0001: 8-byte magic, then one entry per tensor:
//     u32 name length, UTF-8 name, u32 rank, u32 extents..., f32 data.
//     Entries run to end of file.
//   FCFT0001: 8-byte magic, u32 T, u32 F, then T*F f32 values, time-major.

#include "fc/encoder.hpp"
#include "fc/tensor.hpp"

#include <map>
#include <string>

namespace fc::io {

void save_weights(const std::string& path, const encoder::EncoderWeights& w);

// Loads into a weight structure shaped by cfg/seed-0 init; every entry must
// match an expected tensor by name and shape, and none may be missing.
encoder::EncoderWeights load_weights(const std::string& path, const encoder::EncoderConfig& cfg);

// Raw entry table, for tools and tests.
std::map<std::string, Tensor> read_weight_entries(const std::string& path);

void save_features(const std::string& path, const Tensor& features);
Tensor load_features(const std::string& path);

}  // namespace fc::io
