#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace glora {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
uint32_t crc32(const uint8_t* data, size_t n);

// --- little-endian byte packing ------------------------------------------

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void str(const std::string& s);  // u16 length + bytes
  std::vector<uint8_t> take() { return std::move(buf_); }
  const std::vector<uint8_t>& data() const { return buf_; }
  size_t size() const { return buf_.size(); }

 private:
  std::vector<uint8_t> buf_;
};

// Bounds-checked reader; all read failures throw std::runtime_error.
class ByteReader {
 public:
  ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  std::string str();
  void raw(uint8_t* out, size_t n);
  size_t remaining() const { return n_ - pos_; }
  size_t pos() const { return pos_; }
  bool done() const { return pos_ == n_; }

 private:
  void need(size_t n) const;
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
};

// --- container format ------------------------------------------------------
//
//   magic "GLRA" | version u8 | kind u8 | rank u16 | fingerprint u64 |
//   entry count u32 | entries... | crc32 u32 (over all preceding bytes)
//
// entry: name (u16 len + utf-8) | dtype u8 | ndims u8 | dims u32 each |
//        row-major little-endian payload
//
// kind codes 0-3 are adapter bundles, 255 a base-model checkpoint, 254 a
// synthetic corpus. dtype 0 = f32, 1 = f64, 2 = i32 (corpus targets/tags).

constexpr char kContainerMagic[4] = {'G', 'L', 'R', 'A'};
constexpr uint8_t kContainerVersion = 1;
constexpr uint8_t kKindBaseModel = 255;
constexpr uint8_t kKindCorpus = 254;

enum class EntryDtype : uint8_t { F32 = 0, F64 = 1, I32 = 2 };

struct ContainerEntry {
  std::string name;
  EntryDtype dtype = EntryDtype::F32;
  std::vector<uint32_t> dims;
  std::vector<double> floats;   // F32/F64 payloads (f32 widened on read)
  std::vector<int32_t> ints;    // I32 payloads

  int64_t numel() const;
};

struct Container {
  uint8_t kind = 0;
  uint16_t rank = 0;
  uint64_t fingerprint = 0;
  std::vector<ContainerEntry> entries;

  const ContainerEntry* find(const std::string& name) const;
};

enum class ContainerErrc {
  bad_magic = 1,
  bad_version = 2,
  bad_crc = 3,
  truncated = 4,
  bad_entry = 5,
  kind_mismatch = 6,
};

class ContainerError : public std::runtime_error {
 public:
  ContainerError(ContainerErrc code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ContainerErrc code() const { return code_; }

 private:
  ContainerErrc code_;
};

std::vector<uint8_t> write_container(const Container& c);
Container read_container(const uint8_t* data, size_t n);
Container read_container(const std::vector<uint8_t>& data);

void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
// write to <path>.tmp then rename
void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace glora
