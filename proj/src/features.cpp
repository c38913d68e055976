#include "tapkit/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "tapkit/error.hpp"
#include "tapkit/results_io.hpp"

namespace tapkit {
namespace {

constexpr char kMagic[] = "TAPF";
constexpr std::uint32_t kVersion = 1;

}  // namespace

FeatureSequence::FeatureSequence(std::string video_id, std::size_t length, std::size_t dim,
                                 std::vector<float> data)
    : video_id_(std::move(video_id)), length_(length), dim_(dim), data_(std::move(data)) {
  if (length_ < 1 || dim_ < 1)
    throw Error(ErrorCode::kShape, "feature sequence " + video_id_ + ": T and D must be >= 1");
  if (data_.size() != length_ * dim_)
    throw Error(ErrorCode::kShape, "feature sequence " + video_id_ + ": data length != T*D");
  for (float v : data_)
    if (!std::isfinite(v))
      throw Error(ErrorCode::kCorruptFile, "feature sequence " + video_id_ + ": non-finite value");
}

FeatureSequence resize_linear(const FeatureSequence& seq, std::size_t target_length) {
  if (target_length == 0) throw Error(ErrorCode::kShape, "resize_linear: target length must be >= 1");
  const std::size_t T = seq.length();
  const std::size_t D = seq.dim();
  if (target_length == T) return seq;

  std::vector<float> out(target_length * D);
  for (std::size_t j = 0; j < target_length; ++j) {
    const double pos = target_length == 1
                           ? 0.5 * static_cast<double>(T - 1)
                           : static_cast<double>(j) * static_cast<double>(T - 1) /
                                 static_cast<double>(target_length - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    if (lo > T - 1) lo = T - 1;
    const std::size_t hi = std::min(lo + 1, T - 1);
    const double frac = pos - static_cast<double>(lo);
    const auto a = seq.row(lo);
    const auto b = seq.row(hi);
    for (std::size_t d = 0; d < D; ++d) {
      const double v = frac == 0.0 ? a[d] : (1.0 - frac) * a[d] + frac * b[d];
      out[j * D + d] = static_cast<float>(v);
    }
  }
  return FeatureSequence(seq.video_id(), target_length, D, std::move(out));
}

void save_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  std::string bytes(kMagic, 4);
  detail::put_u32(bytes, kVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(seq.length()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(seq.dim()));
  bytes.reserve(bytes.size() + 4 * seq.data().size());
  for (float v : seq.data()) detail::put_f32(bytes, v);
  write_text_atomic(path, bytes);
}

FeatureSequence load_features(const std::filesystem::path& path, std::string video_id) {
  const std::string bytes = read_text(path);
  if (video_id.empty()) video_id = path.stem().string();
  const std::string what = "feature file " + path.string();
  detail::ByteReader in(bytes, what);
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic) != 0)
    throw Error(ErrorCode::kBadMagic, what + ": bad magic");
  in.raw(4);
  const std::uint32_t version = in.u32();
  if (version != kVersion)
    throw Error(ErrorCode::kCorruptFile, what + ": unsupported version " + std::to_string(version));
  const std::uint64_t T = in.u32();
  const std::uint64_t D = in.u32();
  if (T == 0 || D == 0) throw Error(ErrorCode::kCorruptFile, what + ": empty shape");
  if (in.remaining() != T * D * 4)
    throw Error(ErrorCode::kCorruptFile, what + ": header claims " + std::to_string(T * D) +
                                             " values, payload holds " +
                                             std::to_string(in.remaining() / 4));
  std::vector<float> data(T * D);
  for (auto& v : data) {
    v = in.f32();
    if (!std::isfinite(v)) throw Error(ErrorCode::kCorruptFile, what + ": non-finite value");
  }
  return FeatureSequence(std::move(video_id), T, D, std::move(data));
}

FeatureSequence load_features_csv(const std::filesystem::path& path, std::string video_id) {
  std::istringstream in(read_text(path));
  if (video_id.empty()) video_id = path.stem().string();
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(fields, cell, ',')) {
      try {
        data.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, path.string() + ": row " + std::to_string(rows) + ": bad value \"" + cell + "\"");
      }
      ++count;
    }
    if (rows == 0) dim = count;
    if (count != dim)
      throw Error(ErrorCode::kParse, path.string() + ": row " + std::to_string(rows) + " has " +
                                         std::to_string(count) + " values, expected " + std::to_string(dim));
    ++rows;
  }
  return FeatureSequence(std::move(video_id), rows, dim, std::move(data));
}

void write_series_csv(std::span<const double> values, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "snippet,value\n";
  os.precision(9);
  for (std::size_t i = 0; i < values.size(); ++i) os << i << ',' << values[i] << '\n';
  write_text_atomic(path, os.str());
}

}  // namespace tapkit
