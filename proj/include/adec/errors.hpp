#pragma once

#include <stdexcept>
#include <string>

namespace adec {

// Error categories shared by every module. Each maps to one failure class
// named in the component contracts; callers can catch the base to handle all.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class RemoteError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or command line; the CLI maps this to exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace adec
