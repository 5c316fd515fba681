#pragma once

#include <stdexcept>
#include <string>

namespace netscan {

// Every failure raised by the library derives from this type. Messages are
// meant to be printed verbatim by the command-line tool.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace netscan
