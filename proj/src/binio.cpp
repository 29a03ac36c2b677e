#include "svla/binio.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace svla {

namespace {

void put_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("write failed");
}

void get_bytes(std::istream& in, void* p, size_t n, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw std::runtime_error(std::string("truncated file while reading ") + what);
  }
}

}  // namespace

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

void write_u32(std::ostream& out, uint32_t v) { put_bytes(out, &v, 4); }
void write_u64(std::ostream& out, uint64_t v) { put_bytes(out, &v, 8); }
void write_i32(std::ostream& out, int32_t v) { put_bytes(out, &v, 4); }
void write_f64(std::ostream& out, double v) { put_bytes(out, &v, 8); }

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  if (!s.empty()) put_bytes(out, s.data(), s.size());
}

uint32_t read_u32(std::istream& in) {
  uint32_t v;
  get_bytes(in, &v, 4, "u32");
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v;
  get_bytes(in, &v, 8, "u64");
  return v;
}

int32_t read_i32(std::istream& in) {
  int32_t v;
  get_bytes(in, &v, 4, "i32");
  return v;
}

double read_f64(std::istream& in) {
  double v;
  get_bytes(in, &v, 8, "f64");
  return v;
}

std::string read_string(std::istream& in) {
  uint64_t n = read_u64(in);
  if (n > (1ull << 32)) throw std::runtime_error("implausible string length");
  std::string s(n, '\0');
  if (n) get_bytes(in, s.data(), n, "string");
  return s;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  std::vector<double> row_major(static_cast<size_t>(m.size()));
  size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row_major[k++] = m(i, j);
  size_t bytes = row_major.size() * sizeof(double);
  if (bytes) put_bytes(out, row_major.data(), bytes);
  write_u64(out, fnv1a(row_major.data(), bytes));
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows,
                            Eigen::Index cols, const std::string& what) {
  std::vector<double> row_major(static_cast<size_t>(rows * cols));
  size_t bytes = row_major.size() * sizeof(double);
  if (bytes) get_bytes(in, row_major.data(), bytes, what.c_str());
  uint64_t want = read_u64(in);
  uint64_t got = fnv1a(row_major.data(), bytes);
  if (want != got) {
    throw std::runtime_error("checksum mismatch for " + what);
  }
  Eigen::MatrixXd m(rows, cols);
  size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row_major[k++];
  return m;
}

void write_int_matrix(std::ostream& out, const Eigen::MatrixXi& m) {
  std::vector<int32_t> row_major(static_cast<size_t>(m.size()));
  size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row_major[k++] = m(i, j);
  size_t bytes = row_major.size() * sizeof(int32_t);
  if (bytes) put_bytes(out, row_major.data(), bytes);
  write_u64(out, fnv1a(row_major.data(), bytes));
}

Eigen::MatrixXi read_int_matrix(std::istream& in, Eigen::Index rows,
                                Eigen::Index cols, const std::string& what) {
  std::vector<int32_t> row_major(static_cast<size_t>(rows * cols));
  size_t bytes = row_major.size() * sizeof(int32_t);
  if (bytes) get_bytes(in, row_major.data(), bytes, what.c_str());
  uint64_t want = read_u64(in);
  uint64_t got = fnv1a(row_major.data(), bytes);
  if (want != got) {
    throw std::runtime_error("checksum mismatch for " + what);
  }
  Eigen::MatrixXi m(rows, cols);
  size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row_major[k++];
  return m;
}

void expect_magic(std::istream& in, const char* magic, const char* what) {
  size_t n = std::strlen(magic);
  std::string got(n, '\0');
  get_bytes(in, got.data(), n, "magic");
  if (got != magic) {
    throw std::runtime_error(std::string("not a ") + what + " file (bad magic)");
  }
}

}  // namespace svla
