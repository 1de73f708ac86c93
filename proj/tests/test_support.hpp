#ifndef MBDA_TEST_SUPPORT_HPP
#define MBDA_TEST_SUPPORT_HPP

#include "mbda/data_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

namespace mbda::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mbda_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  [[nodiscard]] const std::filesystem::path &path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Table with ids S1.. and T1.. from row-major counts.
inline CountTable make_table(std::size_t n, std::size_t p, const std::vector<Count> &values) {
  Matrix<Count> m(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) m(i, j) = values[i * p + j];
  std::vector<std::string> samples, taxa;
  for (std::size_t i = 0; i < n; ++i) samples.push_back("S" + std::to_string(i + 1));
  for (std::size_t j = 0; j < p; ++j) taxa.push_back("T" + std::to_string(j + 1));
  return {std::move(m), std::move(samples), std::move(taxa)};
}

/// Asymptotic Kolmogorov tail P(K > lambda).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample Kolmogorov-Smirnov p-value (Stephens' finite-n correction).
inline double ks_p_value(std::vector<double> draws, const std::function<double(double)> &cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    double f = cdf(draws[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  double rn = std::sqrt(n);
  return kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d);
}

inline std::filesystem::path data_dir() {
  if (const char *env = std::getenv("MBDA_DATA_DIR")) return env;
  return std::filesystem::path(MBDA_SOURCE_DIR) / "data";
}

}  // namespace mbda::testing

#endif
