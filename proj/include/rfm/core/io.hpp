#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rfm {

/// Write `contents` to `path` atomically (temp file + rename) so that readers
/// never observe a half-written artifact.
void atomic_write(const std::string& path, const std::string& contents);
void atomic_write(const std::string& path, const std::vector<char>& contents);

std::string read_file(const std::string& path);

/// Little-endian binary buffer helpers used by the cache / checkpoint formats.
class BinaryWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(const void* data, std::size_t n);
  void vec(const Eigen::VectorXd& v);
  void mat(const Eigen::MatrixXd& m); /* rows, cols, column-major payload */
  void str(const std::string& s);

  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::vector<char> data) : buf_(std::move(data)) {}
  static BinaryReader from_file(const std::string& path);

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void bytes(void* out, std::size_t n);
  Eigen::VectorXd vec();
  Eigen::MatrixXd mat();
  std::string str();
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

/// FNV-1a over a byte range; used for mesh/content hashes in cache headers.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);

/// Deterministic shortest-roundtrip formatting for doubles (used everywhere a
/// float reaches a text artifact, so reruns are byte-identical).
std::string format_double(double v);

}  // namespace rfm
