#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace mrag {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// Incremental 64-bit FNV-1a.
class Fnv1a64 {
 public:
  Fnv1a64& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= kFnvPrime;
    }
    return *this;
  }

  Fnv1a64& update_byte(std::uint8_t b) noexcept {
    state_ ^= b;
    state_ *= kFnvPrime;
    return *this;
  }

  Fnv1a64& update_u32le(std::uint32_t v) noexcept {
    for (int i = 0; i < 4; ++i) update_byte(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }

  Fnv1a64& update_u64le(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) update_byte(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kFnvOffset;
};

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept { return Fnv1a64{}.update(bytes).digest(); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace mrag
