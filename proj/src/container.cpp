#include "glora/container.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace glora {

uint32_t crc32(const uint8_t* data, size_t n) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void ByteWriter::u16(uint16_t v) {
  u8(static_cast<uint8_t>(v));
  u8(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void ByteWriter::f64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void ByteWriter::str(const std::string& s) {
  if (s.size() > 0xFFFF) throw std::invalid_argument("string too long for wire");
  u16(static_cast<uint16_t>(s.size()));
  bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

void ByteReader::need(size_t n) const {
  if (pos_ + n > n_) throw std::runtime_error("unexpected end of data");
}

uint8_t ByteReader::u8() {
  need(1);
  return p_[pos_++];
}

uint16_t ByteReader::u16() {
  need(2);
  uint16_t v = static_cast<uint16_t>(p_[pos_] | (p_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

uint32_t ByteReader::u32() {
  need(4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p_[pos_ + static_cast<size_t>(i)];
  pos_ += 4;
  return v;
}

uint64_t ByteReader::u64() {
  need(8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p_[pos_ + static_cast<size_t>(i)];
  pos_ += 8;
  return v;
}

float ByteReader::f32() {
  uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double ByteReader::f64() {
  uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string ByteReader::str() {
  uint16_t n = u16();
  need(n);
  std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::raw(uint8_t* out, size_t n) {
  need(n);
  std::memcpy(out, p_ + pos_, n);
  pos_ += n;
}

int64_t ContainerEntry::numel() const {
  int64_t n = 1;
  for (uint32_t d : dims) n *= static_cast<int64_t>(d);
  return n;
}

const ContainerEntry* Container::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<uint8_t> write_container(const Container& c) {
  ByteWriter w;
  w.bytes(reinterpret_cast<const uint8_t*>(kContainerMagic), 4);
  w.u8(kContainerVersion);
  w.u8(c.kind);
  w.u16(c.rank);
  w.u64(c.fingerprint);
  w.u32(static_cast<uint32_t>(c.entries.size()));
  for (const auto& e : c.entries) {
    w.str(e.name);
    w.u8(static_cast<uint8_t>(e.dtype));
    if (e.dims.size() > 0xFF) throw std::invalid_argument("too many dims");
    w.u8(static_cast<uint8_t>(e.dims.size()));
    for (uint32_t d : e.dims) w.u32(d);
    int64_t n = e.numel();
    switch (e.dtype) {
      case EntryDtype::F32:
        if (static_cast<int64_t>(e.floats.size()) != n)
          throw std::invalid_argument("entry " + e.name + ": payload/dims mismatch");
        for (double v : e.floats) w.f32(static_cast<float>(v));
        break;
      case EntryDtype::F64:
        if (static_cast<int64_t>(e.floats.size()) != n)
          throw std::invalid_argument("entry " + e.name + ": payload/dims mismatch");
        for (double v : e.floats) w.f64(v);
        break;
      case EntryDtype::I32:
        if (static_cast<int64_t>(e.ints.size()) != n)
          throw std::invalid_argument("entry " + e.name + ": payload/dims mismatch");
        for (int32_t v : e.ints) w.u32(static_cast<uint32_t>(v));
        break;
    }
  }
  uint32_t crc = crc32(w.data().data(), w.size());
  w.u32(crc);
  return w.take();
}

Container read_container(const uint8_t* data, size_t n) {
  if (n < 4 || std::memcmp(data, kContainerMagic, 4) != 0)
    throw ContainerError(ContainerErrc::bad_magic, "bad container magic");
  if (n < 4 + 1 + 1 + 2 + 8 + 4 + 4)
    throw ContainerError(ContainerErrc::truncated, "container truncated");
  uint32_t stored = 0;
  for (int i = 3; i >= 0; --i) stored = (stored << 8) | data[n - 4 + static_cast<size_t>(i)];
  if (crc32(data, n - 4) != stored)
    throw ContainerError(ContainerErrc::bad_crc, "container CRC mismatch");

  try {
    ByteReader r(data, n - 4);
    uint8_t magic[4];
    r.raw(magic, 4);
    Container c;
    uint8_t version = r.u8();
    if (version != kContainerVersion)
      throw ContainerError(ContainerErrc::bad_version,
                           "unsupported container version " + std::to_string(version));
    c.kind = r.u8();
    c.rank = r.u16();
    c.fingerprint = r.u64();
    uint32_t n_entries = r.u32();
    for (uint32_t i = 0; i < n_entries; ++i) {
      ContainerEntry e;
      e.name = r.str();
      uint8_t dt = r.u8();
      if (dt > 2)
        throw ContainerError(ContainerErrc::bad_entry, "entry " + e.name + ": unknown dtype");
      e.dtype = static_cast<EntryDtype>(dt);
      uint8_t nd = r.u8();
      int64_t count = 1;
      for (uint8_t d = 0; d < nd; ++d) {
        uint32_t ext = r.u32();
        e.dims.push_back(ext);
        count *= static_cast<int64_t>(ext);
      }
      if (count < 0 || count > (1ll << 31))
        throw ContainerError(ContainerErrc::bad_entry, "entry " + e.name + ": absurd extent");
      if (e.dtype == EntryDtype::I32) {
        e.ints.reserve(static_cast<size_t>(count));
        for (int64_t j = 0; j < count; ++j) e.ints.push_back(static_cast<int32_t>(r.u32()));
      } else {
        e.floats.reserve(static_cast<size_t>(count));
        for (int64_t j = 0; j < count; ++j)
          e.floats.push_back(e.dtype == EntryDtype::F32 ? static_cast<double>(r.f32()) : r.f64());
      }
      c.entries.push_back(std::move(e));
    }
    if (!r.done())
      throw ContainerError(ContainerErrc::bad_entry, "trailing bytes after entries");
    return c;
  } catch (const ContainerError&) {
    throw;
  } catch (const std::exception& e) {
    throw ContainerError(ContainerErrc::truncated, std::string("container truncated: ") + e.what());
  }
}

Container read_container(const std::vector<uint8_t>& data) {
  return read_container(data.data(), data.size());
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::string tmp = path + ".tmp";
  write_file(tmp, bytes);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("atomic rename failed for " + path);
  }
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  f.seekg(0, std::ios::end);
  std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> out(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(out.data()), n);
  if (!f) throw std::runtime_error("read failed: " + path);
  return out;
}

}  // namespace glora
