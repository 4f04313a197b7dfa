#pragma once

#include <string>
#include <vector>

#include "adl/check.hpp"
#include "adl/term.hpp"

namespace adl {

enum class RewriteOrder { Outermost, Innermost };

struct BotOptions {
    RewriteOrder order = RewriteOrder::Outermost;
    bool simplify = false;   // optional post-pass (gather-identity etc.)
    int64_t max_steps = 0;   // 0: derive from term size
};

// The bulk-operation transform: rewrites build1 away and pushes index toward
// the leaves, to a fixpoint. Input must be checked against env and contain no
// Share/OneHot/Tuple nodes. The result checks with the same type.
TermPtr normalize(const TermPtr& t, const TypeEnv& env, IdGen& ids,
                  const BotOptions& opts = {});

struct NormalFormReport {
    int build1_count = 0;
    int index_count = 0;
    std::vector<std::string> violations;  // one entry per disallowed occurrence
    bool ok() const { return build1_count == 0 && violations.empty(); }
};

// Classifies a term against the rewrite system's normal forms: no build1, and
// index applied only to variables, constants, single-index ravels or scatters.
NormalFormReport check_normal_form(const TermPtr& t);

// Inlines trivial `let x = y` bindings (used as cleanup after the index rules
// introduce component bindings).
TermPtr inline_let_of_var(const TermPtr& t);

}  // namespace adl
