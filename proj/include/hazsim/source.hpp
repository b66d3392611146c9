#pragma once

#include <string>

namespace hazsim {

/// Location of a declaration or token in an input file. line/column are
/// 1-based; a default-constructed value means "no position known".
struct SourcePos {
  std::string file;
  int line = 0;
  int column = 0;

  bool known() const { return line >= 1 && column >= 1; }
  std::string str() const;

  friend bool operator==(const SourcePos&, const SourcePos&) = default;
};

} // namespace hazsim
