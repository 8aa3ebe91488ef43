#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "c2flow/c2flow.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("c2flow-" + tag + "-" + std::to_string(::getpid()) + "-" +
                                         std::to_string(counter()++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Gaussian features with labels from a logistic model on the first `informative` columns.
inline c2flow::LabeledDataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                                             std::size_t informative = 2, double signal = 2.0) {
  auto rng = c2flow::make_rng(seed, {42});
  c2flow::LabeledDataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = c2flow::standard_normal(rng);
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      if (j < informative) z += (j % 2 ? -signal : signal) * v;
    }
    ds.y.push_back(c2flow::uniform01(rng) < c2flow::sigmoid(z) ? 1 : 0);
    ds.row_keys.push_back({c2flow::IpAddress::v4(0xC6120000u + static_cast<std::uint32_t>(i)),
                           c2flow::CalendarDay(19723)});
  }
  // both classes, whatever the draw
  ds.y[0] = 1;
  ds.y[1] = 0;
  ds.y[2] = 1;
  ds.y[3] = 0;
  return ds;
}

inline std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& X) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(X(i, j));
  return out;
}

inline c2flow::IpAddress ip(const char* s) { return *c2flow::IpAddress::parse(s); }

}  // namespace testing_support
