#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tapkit {

/// T x D snippet features for one video, row-major, one row per snippet.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  FeatureSequence(std::string video_id, std::size_t length, std::size_t dim, std::vector<float> data);

  const std::string& video_id() const noexcept { return video_id_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<float>& data() const noexcept { return data_; }

  std::span<const float> row(std::size_t t) const {
    return {data_.data() + t * dim_, dim_};
  }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;

 private:
  std::string video_id_;
  std::size_t length_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Endpoint-aligned linear resize: output row j samples input position
/// j*(T-1)/(L-1); L == 1 samples the midpoint (T-1)/2.
FeatureSequence resize_linear(const FeatureSequence& seq, std::size_t target_length);

// Binary layout: "TAPF", u32 version (1), u32 T, u32 D, T*D little-endian f32.
void save_features(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence load_features(const std::filesystem::path& path, std::string video_id = {});

/// Hand-written fixtures: one snippet per line, comma-separated values.
FeatureSequence load_features_csv(const std::filesystem::path& path, std::string video_id = {});

/// Debug export of a per-snippet series as "snippet,value" rows.
void write_series_csv(std::span<const double> values, const std::filesystem::path& path);

}  // namespace tapkit
