#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "hazsim/dsl.hpp"
#include "hazsim/model.hpp"

namespace testutil {

inline std::string corpus_path(const std::string& name) {
  return std::string(HAZSIM_CORPUS_DIR) + "/" + name;
}

inline std::string fixture_path(const std::string& name) {
  return std::string(HAZSIM_FIXTURE_DIR) + "/" + name;
}

inline std::string golden_path(const std::string& name) {
  return std::string(HAZSIM_GOLDEN_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// The shipped case-study corpus (.haz + .htd).
inline hazsim::model::ModelBundle load_corpus() {
  hazsim::model::ModelBundle bundle;
  hazsim::dsl::parse_file_into(bundle, corpus_path("casestudy.haz"));
  hazsim::dsl::parse_file_into(bundle, corpus_path("casestudy.htd"));
  return bundle;
}

} // namespace testutil
