#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace stlmine {

/// Little-endian binary writer. Output goes to "<path>.tmp" and is renamed
/// onto the target by commit(), so a failed write never leaves a partial
/// file behind.
class BinWriter {
 public:
  explicit BinWriter(std::string path);
  ~BinWriter();

  BinWriter(const BinWriter&) = delete;
  BinWriter& operator=(const BinWriter&) = delete;

  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* data, std::size_t size);
  void f32_array(std::span<const float> v);
  /// u64 length prefix followed by raw bytes.
  void str(const std::string& s);

  void commit();

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

class BinReader {
 public:
  explicit BinReader(std::string path);

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  void bytes(void* data, std::size_t size);
  void f32_array(std::span<float> v);
  std::string str(std::uint64_t max_len = 1ull << 32);

  bool at_eof();

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace stlmine
