#pragma once

// RFC-4180-style CSV with '.' decimals and a leading provenance comment
// (config hash + seed) so any output file can be traced back to its run.
// Doubles are printed with std::to_chars (shortest round-trip), which keeps
// re-runs byte-identical.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace miniopt::io {

inline std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("fmt_double: to_chars failed");
  return std::string(buf, end);
}

inline std::string fmt_int(std::int64_t v) { return std::to_string(v); }

// FNV-1a, used to stamp outputs with a hash of the originating config.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& provenance,
            std::span<const std::string> header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path.string());
    out_ << "# " << provenance << "\n";
    write_row(header);
  }

  void write_row(std::span<const std::string> cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << "\n";
  }

  void write_row(std::initializer_list<std::string> cells) {
    write_row(std::span<const std::string>(cells.begin(), cells.size()));
  }

  // Trailing comment, e.g. for an abort record.
  void write_comment(const std::string& text) { out_ << "# " << text << "\n"; }

 private:
  static std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char c : cell) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    return quoted;
  }

  std::ofstream out_;
};

}  // namespace miniopt::io
