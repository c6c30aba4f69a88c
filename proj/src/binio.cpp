#include "stlmine/binio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace stlmine {

BinWriter::BinWriter(std::string path)
    : path_(std::move(path)), tmp_(path_ + ".tmp"), out_(tmp_, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot open " + tmp_ + " for writing");
}

BinWriter::~BinWriter() {
  if (!committed_) {
    out_.close();
    std::remove(tmp_.c_str());
  }
}

void BinWriter::bytes(const void* data, std::size_t size) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void BinWriter::u32(std::uint32_t v) { bytes(&v, sizeof v); }
void BinWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void BinWriter::f32(float v) { bytes(&v, sizeof v); }
void BinWriter::f64(double v) { bytes(&v, sizeof v); }

void BinWriter::f32_array(std::span<const float> v) {
  bytes(v.data(), v.size() * sizeof(float));
}

void BinWriter::str(const std::string& s) {
  u64(s.size());
  bytes(s.data(), s.size());
}

void BinWriter::commit() {
  out_.close();
  if (!out_) {
    std::remove(tmp_.c_str());
    throw std::runtime_error("failed writing " + tmp_);
  }
  if (std::rename(tmp_.c_str(), path_.c_str()) != 0) {
    std::remove(tmp_.c_str());
    throw std::runtime_error("cannot move temporary file onto " + path_);
  }
  committed_ = true;
}

BinReader::BinReader(std::string path) : path_(std::move(path)), in_(path_, std::ios::binary) {
  if (!in_) throw std::runtime_error("cannot open " + path_);
}

void BinReader::bytes(void* data, std::size_t size) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in_.gcount()) != size)
    throw std::runtime_error("truncated file: " + path_);
}

std::uint32_t BinReader::u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
std::uint64_t BinReader::u64() { std::uint64_t v; bytes(&v, sizeof v); return v; }
float BinReader::f32() { float v; bytes(&v, sizeof v); return v; }
double BinReader::f64() { double v; bytes(&v, sizeof v); return v; }

void BinReader::f32_array(std::span<float> v) { bytes(v.data(), v.size() * sizeof(float)); }

std::string BinReader::str(std::uint64_t max_len) {
  std::uint64_t len = u64();
  if (len > max_len) throw std::runtime_error("corrupt string length in " + path_);
  std::string s(len, '\0');
  bytes(s.data(), len);
  return s;
}

bool BinReader::at_eof() {
  return in_.peek() == std::ifstream::traits_type::eof();
}

}  // namespace stlmine
