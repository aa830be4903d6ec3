#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace atras {

/// 64-bit FNV-1a; used for fingerprints and config hashes, not security.
class Fnv1a {
 public:
  void update(const void* data, std::size_t len) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }
  void update(std::span<const double> values) noexcept {
    update(values.data(), values.size_bytes());
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) noexcept {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

}  // namespace atras
