#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "geoprior/linalg.hpp"
#include "oracles.hpp"

namespace testing_helpers {

inline geoprior::Matrix to_matrix(const oracle::Dense& d) {
  geoprior::Matrix m(d.size(), d.empty() ? 0 : d[0].size());
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d[i].size(); ++j) m(i, j) = d[i][j];
  return m;
}

inline oracle::Dense to_dense(const geoprior::Matrix& m) {
  oracle::Dense d = oracle::zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("geoprior_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_helpers
