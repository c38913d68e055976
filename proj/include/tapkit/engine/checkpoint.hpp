#pragma once

#include <filesystem>

#include "tapkit/engine/layers.hpp"

namespace tapkit::engine {

// "TAPM", u32 version, u32 graph kind, u64 init seed, u32 segment count,
// u32 layers per segment, six u32 per layer spec (kind, in, out, kernel,
// stride, pad), then each layer's weights and biases as little-endian f32
// in declaration order.
void save_model(const Model<float>& model, const std::filesystem::path& path);
Model<float> load_model(const std::filesystem::path& path);

}  // namespace tapkit::engine
