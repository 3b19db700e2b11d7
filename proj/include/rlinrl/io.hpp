#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rlinrl {

// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& data);
void write_text_atomic(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::string& path);
std::string read_text(const std::string& path);

// Binary PGM, header "P5 <w> <h> 255". Values expected in [0,1], scaled to 0-255.
void write_pgm(const std::string& path, const std::vector<float>& values, int w, int h);

// 64-bit FNV-1a content hash, hex-encoded; used to fingerprint checkpoints.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);
std::string content_hash_hex(const std::vector<std::uint8_t>& data);
std::string file_hash_hex(const std::string& path);

// Simple CSV writer: one header row plus value rows, '.'-decimal, deterministic
// formatting (%.6g).
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<double>& values);
  void add_row_text(const std::vector<std::string>& values);
  std::string str() const { return text_; }
  void save(const std::string& path) const;

 private:
  std::size_t cols_;
  std::string text_;
};

}  // namespace rlinrl
