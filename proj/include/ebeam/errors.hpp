#pragma once

#include <stdexcept>

namespace ebeam
{
//! Invalid combination of run parameters, detected before any work is done.
class ConfigurationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};
} // namespace ebeam
