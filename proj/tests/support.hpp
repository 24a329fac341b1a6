#pragma once

#include "ncjoin/system_io.hpp"

#include <string>

namespace testing_support {

inline ncjoin::FiniteSystem corpus(const std::string& name) {
  return ncjoin::load_system(std::string(NCJOIN_CORPUS_DIR) + "/" + name + ".json");
}

inline std::string corpus_path(const std::string& name) { return std::string(NCJOIN_CORPUS_DIR) + "/" + name + ".json"; }

inline std::string data_path(const std::string& name) { return std::string(NCJOIN_TEST_DATA_DIR) + "/" + name; }

inline ncjoin::Matrix diag(std::initializer_list<ncjoin::Complex> v) {
  ncjoin::Vector d(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (auto x : v) d(i++) = x;
  return d.asDiagonal();
}

}  // namespace testing_support
