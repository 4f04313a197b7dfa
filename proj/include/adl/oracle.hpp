#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "adl/interp.hpp"
#include "adl/term.hpp"

namespace adl {

// Central finite differences of a rank-0 Real program, evaluated with the
// reference interpreter on the original (pre-BOT) term. The step is scaled
// per component: h * max(1, |x_i|).
std::map<std::string, ConcreteArray> finite_diff_grad(const TermPtr& t,
                                                      const std::vector<Param>& params,
                                                      const ValueEnv& inputs, double h = 1e-4);

struct GenOptions {
    int size_budget = 24;
    int max_rank = 3;
    int64_t max_dim = 6;
    double max_magnitude = 1e6;  // resample programs whose probe value exceeds this
};

// Deterministic random well-typed program over the full core grammar
// (build1, cond, gather, scatter, ...) with a rank-0 Real result. Index
// arithmetic is in-range by construction and conditionals branch on discrete
// quantities, so finite differences stay valid everywhere.
Program gen_program(uint64_t seed, const GenOptions& opts = {});

// Deterministic random inputs for the given params.
ValueEnv gen_input(uint64_t seed, const std::vector<Param>& params);

// Grammar-production coverage counter, for generator tests.
std::map<std::string, int> production_census(const TermPtr& t);

}  // namespace adl
