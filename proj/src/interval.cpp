#include "tapkit/interval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tapkit/error.hpp"
#include "tapkit/simd.hpp"

namespace tapkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInterval: return "invalid-interval";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kDegenerateClip: return "degenerate-clip";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kCorruptFile: return "corrupt-file";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kPlacement: return "placement";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kIdMismatch: return "id-mismatch";
    case ErrorCode::kMissingLabel: return "missing-label";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kStageDependency: return "stage-dependency";
  }
  return "unknown";
}

TemporalInterval::TemporalInterval(double start, double end) : start_(start), end_(end) {
  if (!std::isfinite(start) || !std::isfinite(end) || !(start < end)) {
    std::ostringstream os;
    os << "invalid interval [" << start << ", " << end << ")";
    throw Error(ErrorCode::kInvalidInterval, os.str());
  }
}

std::string to_string(const TemporalInterval& iv) {
  std::ostringstream os;
  os << "[" << iv.start() << ", " << iv.end() << ")";
  return os.str();
}

double intersection_length(const TemporalInterval& a, const TemporalInterval& b) noexcept {
  return std::max(0.0, std::min(a.end(), b.end()) - std::max(a.start(), b.start()));
}

double tiou(const TemporalInterval& a, const TemporalInterval& b) noexcept {
  const double inter = intersection_length(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.length() + b.length() - inter);
}

void tiou_many(const TemporalInterval& query, std::span<const double> starts,
               std::span<const double> ends, std::span<double> out) {
  if (starts.size() != ends.size() || out.size() != starts.size())
    throw Error(ErrorCode::kShape, "tiou_many: column sizes differ");
  simd::active().tiou_many(query.start(), query.end(), starts.data(), ends.data(), out.data(),
                           out.size());
}

TemporalInterval normalize(const TemporalInterval& iv, double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw Error(ErrorCode::kOutOfRange, "normalize: duration must be positive");
  if (iv.start() < 0.0 || iv.end() > duration)
    throw Error(ErrorCode::kOutOfRange,
                "normalize: " + to_string(iv) + " outside [0, " + std::to_string(duration) + "]");
  return {iv.start() / duration, iv.end() / duration};
}

TemporalInterval denormalize(const TemporalInterval& iv, double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw Error(ErrorCode::kOutOfRange, "denormalize: duration must be positive");
  return {iv.start() * duration, iv.end() * duration};
}

TemporalInterval clip_unit(const TemporalInterval& iv) {
  const double s = std::max(iv.start(), 0.0);
  const double e = std::min(iv.end(), 1.0);
  if (!(s < e)) throw Error(ErrorCode::kDegenerateClip, "clip_unit: " + to_string(iv) + " misses [0, 1]");
  return {s, e};
}

}  // namespace tapkit
