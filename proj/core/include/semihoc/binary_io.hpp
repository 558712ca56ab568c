#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace semihoc {

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);

// Little-endian primitive writers/readers shared by the feature and checkpoint
// formats. Readers throw DataError on short reads, naming `what`.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view b);
  void str(std::string_view s);  // u64 length prefix

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint8_t u8(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  float f32(const char* what);
  double f64(const char* what);
  std::string bytes(std::size_t n, const char* what);
  std::string str(const char* what);

 private:
  void read(char* dst, std::size_t n, const char* what);
  std::istream& in_;
};

}  // namespace semihoc
