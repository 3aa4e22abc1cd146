#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "nff/random.hpp"
#include "nff/tensor.hpp"

namespace nff::test {

inline Tensor3 random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor3 t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Fresh empty directory under the system temp dir, unique per call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("nff_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nff::test
