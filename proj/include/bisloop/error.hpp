// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bisloop {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid inputs: demographics, scenario files, controller settings.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Controller parameters left the finite/bounded region.
class DivergenceError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace bisloop
