#include "tapkit/engine/checkpoint.hpp"

#include "../binary_io.hpp"
#include "tapkit/error.hpp"
#include "tapkit/results_io.hpp"

namespace tapkit::engine {
namespace {

constexpr char kMagic[] = "TAPM";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_model(const Model<float>& model, const std::filesystem::path& path) {
  std::string bytes(kMagic, 4);
  detail::put_u32(bytes, kVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(model.kind));
  detail::put_u64(bytes, model.seed);
  detail::put_u32(bytes, static_cast<std::uint32_t>(model.segments.size()));
  for (const auto& seg : model.segments) detail::put_u32(bytes, static_cast<std::uint32_t>(seg.layers().size()));
  for (const auto& seg : model.segments) {
    for (const auto& l : seg.layers()) {
      const auto& s = l.spec();
      for (int v : {static_cast<int>(s.kind), s.in, s.out, s.kernel, s.stride, s.pad})
        detail::put_u32(bytes, static_cast<std::uint32_t>(v));
    }
  }
  for (const auto& seg : model.segments) {
    for (const auto& l : seg.layers()) {
      for (float w : l.weight()) detail::put_f32(bytes, w);
      for (float b : l.bias()) detail::put_f32(bytes, b);
    }
  }
  write_text_atomic(path, bytes);
}

Model<float> load_model(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  const std::string what = "checkpoint " + path.string();
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic) != 0)
    throw Error(ErrorCode::kBadMagic, what + ": bad magic");
  detail::ByteReader in(bytes, what);
  in.raw(4);
  if (in.u32() != kVersion) throw Error(ErrorCode::kCorruptFile, what + ": unsupported version");
  Model<float> model;
  const std::uint32_t kind = in.u32();
  if (kind > static_cast<std::uint32_t>(GraphKind::kSsad))
    throw Error(ErrorCode::kCorruptFile, what + ": unknown graph kind");
  model.kind = static_cast<GraphKind>(kind);
  model.seed = in.u64();
  const std::uint32_t num_segments = in.u32();
  if (num_segments > 4096) throw Error(ErrorCode::kCorruptFile, what + ": implausible segment count");
  std::vector<std::uint32_t> counts(num_segments);
  for (auto& c : counts) c = in.u32();
  for (std::uint32_t c : counts) {
    if (c > 4096) throw Error(ErrorCode::kCorruptFile, what + ": implausible layer count");
    std::vector<LayerSpec> specs;
    for (std::uint32_t i = 0; i < c; ++i) {
      LayerSpec s;
      const std::uint32_t k = in.u32();
      if (k > static_cast<std::uint32_t>(LayerKind::kDense))
        throw Error(ErrorCode::kCorruptFile, what + ": unknown layer kind");
      s.kind = static_cast<LayerKind>(k);
      s.in = static_cast<int>(in.u32());
      s.out = static_cast<int>(in.u32());
      s.kernel = static_cast<int>(in.u32());
      s.stride = static_cast<int>(in.u32());
      s.pad = static_cast<int>(in.u32());
      try {
        s.validate();
      } catch (const Error&) {
        throw Error(ErrorCode::kCorruptFile, what + ": invalid layer spec");
      }
      specs.push_back(s);
    }
    model.segments.emplace_back(specs);
  }
  for (auto& seg : model.segments) {
    for (auto& l : seg.layers()) {
      for (float& w : l.weight()) w = in.f32();
      for (float& b : l.bias()) b = in.f32();
    }
  }
  if (in.remaining() != 0) throw Error(ErrorCode::kCorruptFile, what + ": trailing bytes");
  return model;
}

}  // namespace tapkit::engine
