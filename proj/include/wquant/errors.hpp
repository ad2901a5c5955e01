#pragma once

#include <stdexcept>
#include <string>

namespace wquant {

struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wquant
