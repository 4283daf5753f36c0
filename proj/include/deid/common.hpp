// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deid {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, size_t offset)
      : Error(what + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  size_t offset() const { return offset_; }

private:
  size_t offset_;
};

class UnsupportedCodecError : public Error {
public:
  using Error::Error;
};

class PolicyError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class BackendError : public Error {
public:
  using Error::Error;
};

}  // namespace deid
