#pragma once

#include <stdexcept>
#include <string>

namespace cavmon {

// Base for every error raised by the library. Callers that only care about
// "something in cavmon failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cavmon
