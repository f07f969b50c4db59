#include <bit>
#include <cmath>
#include <cstring>

#include "g2s/documents.hpp"
#include "g2s/error.hpp"
#include "g2s/geometry.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace g2s {

namespace {
constexpr char kMagic[] = "G23DPC1";
constexpr std::size_t kMagicLen = 7;
}  // namespace

std::string write_pointcloud_binary(std::span<const Vec3> pc) {
  std::string out(kMagic, kMagicLen);
  const std::uint64_t n = pc.size();
  out.append(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& p : pc)
    for (double c : p) {
      const float f = static_cast<float>(c);
      out.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
  return out;
}

PointCloud read_pointcloud_binary(std::string_view bytes) {
  if (bytes.size() < kMagicLen + 8 || bytes.substr(0, kMagicLen) != std::string_view(kMagic, kMagicLen))
    throw ParseError("byte 0", "not a G23DPC1 point cloud");
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + kMagicLen, sizeof n);
  const std::size_t body = bytes.size() - kMagicLen - 8;
  if (n > body / 12 || body != n * 12)
    throw ParseError("byte " + std::to_string(kMagicLen + 8), "payload size does not match point count " + std::to_string(n));
  PointCloud pc(n);
  const char* p = bytes.data() + kMagicLen + 8;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      float f;
      std::memcpy(&f, p, sizeof f);
      p += sizeof f;
      pc[i][k] = f;
    }
  return pc;
}

std::string write_pointcloud_json(std::span<const Vec3> pc) {
  Json arr = Json::array();
  for (const auto& p : pc) arr.push_back({p[0], p[1], p[2]});
  return arr.dump() + "\n";
}

PointCloud read_pointcloud_json(std::string_view text) {
  const Json j = parse_json(text);
  if (!j.is_array()) throw ParseError("/", "expected an array of [x,y,z]");
  PointCloud pc;
  pc.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "/" + std::to_string(i);
    if (!j[i].is_array() || j[i].size() != 3) throw ParseError(path, "expected [x,y,z]");
    Vec3 p;
    for (std::size_t k = 0; k < 3; ++k) {
      p[k] = detail::require_number(j[i][k], path + "/" + std::to_string(k));
      if (!std::isfinite(p[k])) throw ParseError(path, "non-finite coordinate");
    }
    pc.push_back(p);
  }
  return pc;
}

PointCloud read_pointcloud(std::string_view bytes) {
  if (bytes.substr(0, kMagicLen) == std::string_view(kMagic, kMagicLen)) return read_pointcloud_binary(bytes);
  return read_pointcloud_json(bytes);
}

}  // namespace g2s
