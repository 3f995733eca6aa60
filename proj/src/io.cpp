#include "redcliff/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace redcliff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

void append_u32(std::vector<std::byte>& buf, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  buf.insert(buf.end(), p, p + 4);
}

void append_u64(std::vector<std::byte>& buf, std::uint64_t v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  buf.insert(buf.end(), p, p + 8);
}

std::uint32_t read_u32(const std::vector<std::byte>& buf, std::size_t& off) {
  if (off + 4 > buf.size()) throw std::runtime_error("read_u32: truncated buffer");
  std::uint32_t v;
  std::memcpy(&v, buf.data() + off, 4);
  off += 4;
  return v;
}

std::uint64_t read_u64(const std::vector<std::byte>& buf, std::size_t& off) {
  if (off + 8 > buf.size()) throw std::runtime_error("read_u64: truncated buffer");
  std::uint64_t v;
  std::memcpy(&v, buf.data() + off, 8);
  off += 8;
  return v;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::uint32_t c = 0;
  std::array<char, 65536> chunk;
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    c = crc32(chunk.data(), static_cast<std::size_t>(in.gcount()), c);
  }
  return c;
}

void write_file_with_crc(const std::filesystem::path& path, const std::vector<std::byte>& payload) {
  std::vector<std::byte> out = payload;
  append_u32(out, crc32(payload.data(), payload.size()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::byte> read_file_with_crc(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open file: " + path.string());
  const auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::byte> buf(size);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!f) throw std::runtime_error("read failed: " + path.string());
  if (buf.size() < 4) throw std::runtime_error("checksum failure: file too short: " + path.string());
  std::size_t off = buf.size() - 4;
  const std::uint32_t stored = read_u32(buf, off);
  buf.resize(buf.size() - 4);
  const std::uint32_t actual = crc32(buf.data(), buf.size());
  if (stored != actual) throw std::runtime_error("checksum failure: " + path.string());
  return buf;
}

void append_f64(std::vector<std::byte>& buf, const double* values, std::size_t count) {
  const auto* p = reinterpret_cast<const std::byte*>(values);
  buf.insert(buf.end(), p, p + 8 * count);
}

void read_f64(const std::vector<std::byte>& buf, std::size_t& offset, double* out, std::size_t count) {
  if (offset + 8 * count > buf.size()) throw std::runtime_error("read_f64: truncated buffer");
  std::memcpy(out, buf.data() + offset, 8 * count);
  offset += 8 * count;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  lock_path_ = dir / ".lock";
  // O_EXCL-style create; fails if another command holds the directory.
  std::ofstream probe;
  if (std::filesystem::exists(lock_path_))
    throw std::runtime_error("output directory is locked by another command: " + dir.string());
  probe.open(lock_path_, std::ios::out);
  if (!probe) throw std::runtime_error("cannot create lock file in: " + dir.string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(lock_path_, ec);
}

void save_recording(const std::filesystem::path& path, const Eigen::MatrixXd& x) {
  std::vector<std::byte> buf;
  buf.reserve(20 + 8 * static_cast<std::size_t>(x.size()));
  const char magic[4] = {'R', 'C', 'F', 'R'};
  buf.insert(buf.end(), reinterpret_cast<const std::byte*>(magic),
             reinterpret_cast<const std::byte*>(magic) + 4);
  append_u32(buf, 1);
  append_u64(buf, static_cast<std::uint64_t>(x.rows()));
  append_u64(buf, static_cast<std::uint64_t>(x.cols()));
  RowMat row = x;
  append_f64(buf, row.data(), static_cast<std::size_t>(row.size()));
  write_file_with_crc(path, buf);
}

Eigen::MatrixXd load_recording(const std::filesystem::path& path) {
  const auto buf = read_file_with_crc(path);
  std::size_t off = 0;
  if (buf.size() < 4 || std::memcmp(buf.data(), "RCFR", 4) != 0)
    throw std::runtime_error("corrupt header: not a recording file: " + path.string());
  off = 4;
  const std::uint32_t version = read_u32(buf, off);
  if (version != 1)
    throw std::runtime_error("unsupported recording format version " + std::to_string(version));
  const auto n_c = static_cast<Eigen::Index>(read_u64(buf, off));
  const auto t = static_cast<Eigen::Index>(read_u64(buf, off));
  if (buf.size() - off != static_cast<std::size_t>(n_c * t) * 8)
    throw std::runtime_error("shape mismatch in recording file: " + path.string());
  RowMat row(n_c, t);
  read_f64(buf, off, row.data(), static_cast<std::size_t>(row.size()));
  return row;
}

}  // namespace redcliff
