#include "semihoc/binary_io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "semihoc/error.hpp"
#include "semihoc/rng.hpp"

namespace semihoc {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng;
  if (!is) throw DataError("corrupt RNG state");
  return rng;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(const char* buf) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::bytes(std::string_view b) { out_.write(b.data(), static_cast<std::streamsize>(b.size())); }
void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  bytes(s);
}

void BinaryReader::read(char* dst, std::size_t n, const char* what) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw DataError(std::string("unexpected end of file while reading ") + what);
}

std::uint8_t BinaryReader::u8(const char* what) {
  char c;
  read(&c, 1, what);
  return static_cast<std::uint8_t>(c);
}

std::uint32_t BinaryReader::u32(const char* what) {
  char buf[4];
  read(buf, 4, what);
  return get_le<std::uint32_t>(buf);
}

std::uint64_t BinaryReader::u64(const char* what) {
  char buf[8];
  read(buf, 8, what);
  return get_le<std::uint64_t>(buf);
}

float BinaryReader::f32(const char* what) { return std::bit_cast<float>(u32(what)); }
double BinaryReader::f64(const char* what) { return std::bit_cast<double>(u64(what)); }

std::string BinaryReader::bytes(std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0) read(s.data(), n, what);
  return s;
}

std::string BinaryReader::str(const char* what) {
  const std::uint64_t n = u64(what);
  if (n > (1ULL << 32)) throw DataError(std::string("implausible string length in ") + what);
  return bytes(static_cast<std::size_t>(n), what);
}

}  // namespace semihoc
