#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace redcliff {

// CRC-32 (IEEE, reflected, poly 0xEDB88320), zlib-compatible.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);
std::uint32_t crc32_file(const std::filesystem::path& path);

/// Payload followed by a 4-byte little-endian CRC32 of the payload.
void write_file_with_crc(const std::filesystem::path& path, const std::vector<std::byte>& payload);

/// Verifies and strips the CRC32 trailer; throws on mismatch or short file.
std::vector<std::byte> read_file_with_crc(const std::filesystem::path& path);

// Little-endian append/read of raw doubles (IEEE 754 binary64).
void append_f64(std::vector<std::byte>& buf, const double* values, std::size_t count);
void read_f64(const std::vector<std::byte>& buf, std::size_t& offset, double* out, std::size_t count);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Creates `dir/.lock` exclusively; removed on destruction. A held lock in
/// another process makes construction throw.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

// Fixed-width recording container: magic "RCFR", u32 version, u64 n_c, u64 T,
// row-major float64 samples, CRC32 trailer.
void save_recording(const std::filesystem::path& path, const Eigen::MatrixXd& x);
Eigen::MatrixXd load_recording(const std::filesystem::path& path);

}  // namespace redcliff
