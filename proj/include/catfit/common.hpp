#ifndef CATFIT_COMMON_HPP
#define CATFIT_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace catfit {

inline constexpr const char* kVersion = "0.1.0";

// Row-major because we slice stimuli (rows) far more often than dimensions.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Eigen::Index>;

// Bad inputs (files, names, shapes). The CLI maps these to exit code 2;
// everything else derived from std::exception exits 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, const std::string& msg) {
  if (sink) sink->push_back(msg);
}

// Shortest text form that reparses to the same double (17 significant digits).
std::string format_double(double v);

// Locale-independent parse; rejects trailing garbage and non-finite spellings
// are returned as-is (callers decide whether NaN/inf is acceptable).
bool parse_double(const std::string& s, double* out);
bool parse_long(const std::string& s, long* out);

// FNV-1a, used for input digests in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  double m = x > 0.0 ? x : 0.0;
  return m + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace catfit

#endif  // CATFIT_COMMON_HPP
