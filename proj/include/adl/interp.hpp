#pragma once

#include <map>
#include <string>
#include <vector>

#include "adl/term.hpp"

namespace adl {

using ValueEnv = std::map<std::string, ConcreteArray>;

// Call-by-value reference evaluator. Share has identity semantics. Total: no
// runtime errors on checked terms (missing env bindings are programming
// errors and assert).
ConcreteArray eval(const TermPtr& t, const ValueEnv& env);

// Like eval but memoises Share bodies by id; each id's body is evaluated at
// most once. Returns per-id evaluation counts for instrumentation.
struct MemoResult {
    ConcreteArray value;
    std::map<long, int> share_eval_counts;
};
MemoResult eval_memo(const TermPtr& t, const ValueEnv& env);

// Evaluates a top-level term that may be a Tuple (wrapper output).
std::vector<ConcreteArray> eval_multi(const TermPtr& t, const ValueEnv& env);

// Removes Share wrappers (identity semantics).
TermPtr strip_share(const TermPtr& t);

}  // namespace adl
