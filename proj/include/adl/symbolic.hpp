#pragma once

#include <map>
#include <string>
#include <vector>

#include "adl/bot.hpp"
#include "adl/check.hpp"
#include "adl/delta.hpp"
#include "adl/reverse.hpp"

namespace adl {

// Result of forward dualization at the symbolic carrier: the primal program
// (a chain of bindings plus a result term) and the symbolic Delta trace,
// disentangled. The dual references primal values only through the bound
// variable names.
struct DualTerm {
    std::vector<std::pair<std::string, TermPtr>> primal_binds;
    TermPtr primal;  // references params and primal_binds names
    SymDelta dual;
    std::vector<std::pair<std::string, DVarName>> real_inputs;  // declaration order

    // The primal as a single term (binds stacked as lets).
    TermPtr primal_term() const;
};

// Forward dualization of a checked, BOT-normal (no build1), rank-0 Real term.
// Input leaves become Input 1..n for the real params in declaration order;
// every differentiated primitive's trace fragment is Share-wrapped with a
// fresh monotone id.
DualTerm dualize(const TermPtr& t, const std::vector<Param>& params, IdGen& ids);

// The symbolically-executing reverse pass: cotangents are Terms; the incoming
// cotangent is Share-wrapped before duplication at Add/LitArray.
struct SymbolicPolicy {
    using Car = SymbolicCarrier;
    using Cot = TermPtr;
    IdGen& ids;

    Cot add(const Cot& a, const Cot& b) { return t_op(Op::Add, {a, b}); }
    Cot scale(const Car::ScaleArr& arr, const Cot& c) { return t_op(Op::Mul, {arr, c}); }
    Cot share_dup(const Cot& c) {
        // duplicating a variable or literal costs nothing
        if (c->tag == TermTag::Var || c->tag == TermTag::Const) return c;
        return t_share(ids.fresh_id(), c);
    }
    Cot one_hot_(const Shape& sh, const Car::Ix& ix, const Cot& c) { return t_one_hot(sh, ix, c); }
    Cot replicate_(int64_t k, const Cot& c) { return t_replicate(k, c); }
    Cot sum_outer_(const Cot& c) { return t_sum_outer(c); }
    Cot scatter_(const Shape& sh, const Cot& c, const Car::Fn& fn) { return t_scatter(sh, c, fn); }
    Cot gather_(const Shape& sh, const Cot& c, const Car::Fn& fn) { return t_gather(sh, c, fn); }
    Cot index_slice(const Cot& c, int64_t j) { return t_index(c, {t_int(j)}); }
    Cot transpose_(const std::vector<int>& perm, const Cot& c) { return t_transpose(perm, c); }
    Cot reshape_(const Shape& sh, const Cot& c) { return t_reshape(sh, c); }
};

// Runs the reverse pass symbolically. c must be a variable reference or a
// constant. Returns one gradient term per contributing input.
std::map<int, TermPtr> sym_reverse_pass(IdGen& ids, const TermPtr& c, const SymDelta& d);

// --- global sharing to let-bindings (the unshare/stackLets pair) ------------

using UnshareMap = std::map<long, std::pair<std::string, TermPtr>>;

// Replaces every share in t by a variable reference; first visits bind a
// fresh deterministic name and convert the body, later visits reuse the name.
// Index payloads pass through untouched. Terms containing Let or Build1 are
// malformed inputs.
std::pair<UnshareMap, TermPtr> unshare(UnshareMap m, const TermPtr& t);

// Stacks the collected bindings, lowest id outermost.
TermPtr stack_lets(const UnshareMap& m, const TermPtr& t);

TermPtr share_to_let(const TermPtr& t);

// --- full wrapper -------------------------------------------------------------

struct GradientProgram {
    Program prog;                          // params = source params + cotangent
    std::string cotangent_name;
    std::vector<std::string> grad_order;   // real params, declaration order
};

// BOT -> dualize -> symbolic reverse pass -> reconstruct -> share conversion.
// The body is a top-level tuple (primal, grad x1, ..., grad xn) over the
// real-kind params, with the primal bindings hoisted so the primal and the
// gradients share them.
GradientProgram build_gradient_program(const Program& p, const BotOptions& bot_opts = {});

// Evaluates a gradient program at given inputs and cotangent; returns the
// primal value and per-real-param gradients.
struct GradProgramEval {
    ConcreteArray value;
    std::map<std::string, ConcreteArray> grad;
};
GradProgramEval eval_gradient_program(const GradientProgram& gp, const ValueEnv& inputs,
                                      const ConcreteArray& ctg);

}  // namespace adl
