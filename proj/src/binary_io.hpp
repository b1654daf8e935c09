#pragma once

// Little-endian block helpers shared by the model and dataset containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alma/errors.hpp"

namespace alma::io {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_block(std::string& out, const std::vector<double>& values) {
  put_u64(out, values.size());
  for (double v : values) put_f64(out, v);
}

/// Sequential reader over a byte buffer that reports offsets in errors.
class Reader {
 public:
  Reader(const std::string& bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::vector<double> block(std::size_t expected, const std::string& what) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64(what.c_str());
    if (n != expected) {
      throw ParseError("offset " + std::to_string(at) + ": block '" + what + "' declares " + std::to_string(n) +
                       " values, expected " + std::to_string(expected));
    }
    need(n * 8, what.c_str());
    std::vector<double> out(n);
    for (auto& v : out) v = f64(what.c_str());
    return out;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("offset " + std::to_string(pos_) + ": truncated file while reading " + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_;
};

/// Key/value header lines following a magic line, terminated by "end".
struct HeaderLine {
  std::size_t line_no;
  std::string key;
  std::string value;
};

struct Header {
  std::vector<HeaderLine> lines;
  std::size_t payload_offset = 0;
};

inline Header parse_header(const std::string& bytes, std::string_view magic) {
  if (bytes.compare(0, magic.size(), magic) != 0) {
    throw ParseError("line 1, offset 0: bad magic, expected '" + std::string(magic.substr(0, magic.size() - 1)) + "'");
  }
  Header h;
  std::size_t pos = magic.size();
  std::size_t line_no = 2;
  while (true) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ", offset " + std::to_string(pos) +
                       ": truncated header (missing 'end')");
    }
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line == "end") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    h.lines.push_back({line_no, line.substr(0, eq), line.substr(eq + 1)});
    ++line_no;
  }
  h.payload_offset = pos;
  return h;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace alma::io
