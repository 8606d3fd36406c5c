#pragma once

// Little snapshot format: a magic tag, a version, then length-prefixed fields.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "semc/errors.hpp"

namespace semc::util {

class BinaryWriter {
 public:
  BinaryWriter(std::string_view magic, std::uint32_t version) {
    buf_.append(magic);
    u32(version);
  }

  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
  }

  const std::string& bytes() const { return buf_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error("short write to " + path);
  }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class BinaryReader {
 public:
  /// Checks the magic tag and returns the stored version through `version`.
  BinaryReader(std::string data, std::string_view magic, std::uint32_t* version, std::string where = "snapshot")
      : buf_(std::move(data)), where_(std::move(where)) {
    if (buf_.compare(0, magic.size(), magic) != 0) throw Error(where_ + ": not a " + std::string(magic) + " file");
    pos_ = magic.size();
    *version = u32();
  }

  static std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }

  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    auto n = u64();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  void need(std::uint64_t n) const {
    if (n > buf_.size() - pos_) throw Error(where_ + ": truncated");
  }

  std::string buf_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace semc::util
