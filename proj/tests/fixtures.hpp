#ifndef INSITU_TESTS_FIXTURES_HPP
#define INSITU_TESTS_FIXTURES_HPP

#include <json.hpp>

#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace insitu::test {

inline nlohmann::json load_fixture(const std::string& name) {
  std::ifstream in(std::filesystem::path(INSITU_FIXTURE_DIR) / name);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return nlohmann::json::parse(in);
}

inline std::complex<double> as_complex(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

inline double rel_err(std::complex<double> a, std::complex<double> b) { return std::abs(a - b) / std::abs(b); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("insitu-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace insitu::test

#endif
