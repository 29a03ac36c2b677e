#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace svla {

// Little-endian binary primitives shared by the checkpoint and dataset
// formats. Readers throw std::runtime_error on short reads so truncated
// files surface as errors instead of garbage tensors.

void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
void write_i32(std::ostream& out, int32_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);

uint32_t read_u32(std::istream& in);
uint64_t read_u64(std::istream& in);
int32_t read_i32(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);

// row-major f64 payload with a trailing FNV-1a checksum of the raw bytes
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows,
                            Eigen::Index cols, const std::string& what);

// i32 payload with trailing checksum, used for validity masks
void write_int_matrix(std::ostream& out, const Eigen::MatrixXi& m);
Eigen::MatrixXi read_int_matrix(std::istream& in, Eigen::Index rows,
                                Eigen::Index cols, const std::string& what);

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull);

// reads the fixed magic tag or throws naming the expected format
void expect_magic(std::istream& in, const char* magic, const char* what);

}  // namespace svla
