#include "rfm/core/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rfm/core/error.hpp"

namespace rfm {

static void atomic_write_raw(const std::string& path, const char* data, std::size_t n) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(data, static_cast<std::streamsize>(n));
    if (!out) throw IoError("short write: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed: " + tmp + " -> " + path + " (" + ec.message() + ")");
}

void atomic_write(const std::string& path, const std::string& contents) {
  atomic_write_raw(path, contents.data(), contents.size());
}

void atomic_write(const std::string& path, const std::vector<char>& contents) {
  atomic_write_raw(path, contents.data(), contents.size());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

void BinaryWriter::u32(std::uint32_t v) { bytes(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void BinaryWriter::f64(double v) { bytes(&v, sizeof v); }

void BinaryWriter::bytes(const void* data, std::size_t n) {
  const char* p = static_cast<const char*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void BinaryWriter::vec(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void BinaryWriter::mat(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  bytes(s.data(), s.size());
}

BinaryReader BinaryReader::from_file(const std::string& path) {
  std::string s = read_file(path);
  return BinaryReader(std::vector<char>(s.begin(), s.end()));
}

void BinaryReader::bytes(void* out, std::size_t n) {
  if (pos_ + n > buf_.size()) throw ParseError("binary payload truncated");
  std::memcpy(out, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  bytes(&v, sizeof v);
  return v;
}
std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  bytes(&v, sizeof v);
  return v;
}
double BinaryReader::f64() {
  double v;
  bytes(&v, sizeof v);
  return v;
}

Eigen::VectorXd BinaryReader::vec() {
  std::uint64_t n = u64();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  bytes(v.data(), sizeof(double) * n);
  return v;
}

Eigen::MatrixXd BinaryReader::mat() {
  std::uint64_t r = u64(), c = u64();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  bytes(m.data(), sizeof(double) * r * c);
  return m;
}

std::string BinaryReader::str() {
  std::uint64_t n = u64();
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string format_double(double v) {
  /* shortest representation that round-trips exactly */
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v || (std::isnan(back) && std::isnan(v))) break;
  }
  return std::string(buf);
}

}  // namespace rfm
