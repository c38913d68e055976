#pragma once

#include <span>
#include <string>
#include <vector>

namespace tapkit {

/// Half-open temporal span [start, end). Seconds, or unit fractions when
/// normalized to a video's duration. Zero-length spans are rejected.
class TemporalInterval {
 public:
  TemporalInterval(double start, double end);

  double start() const noexcept { return start_; }
  double end() const noexcept { return end_; }
  double length() const noexcept { return end_ - start_; }
  double center() const noexcept { return 0.5 * (start_ + end_); }

  bool contains(double t) const noexcept { return t >= start_ && t < end_; }

  friend bool operator==(const TemporalInterval&, const TemporalInterval&) = default;

 private:
  double start_;
  double end_;
};

std::string to_string(const TemporalInterval& iv);

double intersection_length(const TemporalInterval& a, const TemporalInterval& b) noexcept;

/// Temporal IoU; union is len(a) + len(b) - intersection so disjoint pairs
/// score exactly 0.
double tiou(const TemporalInterval& a, const TemporalInterval& b) noexcept;

/// tIoU of `query` against every interval in the (start, end) columns.
/// Uses the active SIMD kernel.
void tiou_many(const TemporalInterval& query, std::span<const double> starts,
               std::span<const double> ends, std::span<double> out);

TemporalInterval normalize(const TemporalInterval& iv, double duration);
TemporalInterval denormalize(const TemporalInterval& iv, double duration);

/// Intersection with [0, 1]; throws kDegenerateClip when nothing is left.
TemporalInterval clip_unit(const TemporalInterval& iv);

}  // namespace tapkit
