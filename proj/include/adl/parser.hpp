#pragma once

#include <stdexcept>
#include <string>

#include "adl/term.hpp"

namespace adl {

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error(msg + " at " + std::to_string(line_) + ":" + std::to_string(col_)),
          line(line_),
          col(col_) {}
};

// Parses a single expression (no params header).
TermPtr parse_term(const std::string& text);

// Parses a program file: a `(params ...)` header followed by one expression.
Program parse_program(const std::string& text);

}  // namespace adl
