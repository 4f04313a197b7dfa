#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "adl/term.hpp"

namespace adl {

struct CheckError : std::runtime_error {
    std::string code;  // UnboundVar, ShapeMismatch, PermutationInvalid, ...
    CheckError(std::string code_, const std::string& msg)
        : std::runtime_error(code_ + ": " + msg), code(std::move(code_)) {}
};

using TypeEnv = std::map<std::string, ArrayType>;

// Shape/type checks t under env, annotating every node with its ArrayType.
// Throws CheckError naming the violated rule. Tuple is only allowed at the
// top level (use check_program for wrapper outputs).
ArrayType check(const TermPtr& t, const TypeEnv& env);

// Checks a program body against its declared params; allows a root Tuple.
std::vector<ArrayType> check_program(const Program& p);

TypeEnv env_of_params(const std::vector<Param>& params);

}  // namespace adl
