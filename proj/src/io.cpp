#include "rlinrl/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rlinrl/errors.hpp"

namespace fs = std::filesystem;

namespace rlinrl {

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& data) {
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    if (!data.empty())
      f.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename failed for " + path + ": " + ec.message());
  }
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  return data;
}

std::string read_text(const std::string& path) {
  auto d = read_file(path);
  return std::string(d.begin(), d.end());
}

void write_pgm(const std::string& path, const std::vector<float>& values, int w, int h) {
  if (static_cast<std::size_t>(w) * h != values.size())
    throw UsageError("write_pgm: size mismatch");
  std::string header = "P5 " + std::to_string(w) + " " + std::to_string(h) + " 255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + values.size());
  for (float v : values) {
    float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<std::uint8_t>(c * 255.0f + 0.5f));
  }
  write_file_atomic(path, out);
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string content_hash_hex(const std::vector<std::uint8_t>& data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data.data(), data.size())));
  return std::string(buf);
}

std::string file_hash_hex(const std::string& path) {
  return content_hash_hex(read_file(path));
}

CsvWriter::CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

void CsvWriter::add_row(const std::vector<double>& values) {
  if (values.size() != cols_) throw UsageError("csv: column count mismatch");
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) text_ += ',';
    std::snprintf(buf, sizeof(buf), "%.6g", values[i]);
    text_ += buf;
  }
  text_ += '\n';
}

void CsvWriter::add_row_text(const std::vector<std::string>& values) {
  if (values.size() != cols_) throw UsageError("csv: column count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) text_ += ',';
    text_ += values[i];
  }
  text_ += '\n';
}

void CsvWriter::save(const std::string& path) const { write_text_atomic(path, text_); }

}  // namespace rlinrl
