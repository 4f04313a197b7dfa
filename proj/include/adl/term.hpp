#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adl/tensor.hpp"

namespace adl {

struct Term;
using TermPtr = std::shared_ptr<const Term>;

// A dynamic index: a list of rank-0 Int terms. Components have no sharing
// between them (each is an independent expression).
using IxExpr = std::vector<TermPtr>;

// An index mapping function: binds rank-0 Int variables, produces an IxExpr.
struct IxFn {
    std::vector<std::string> binders;
    IxExpr body;
};

struct ArrayType {
    Kind kind = Kind::Real;
    Shape shape;
    bool operator==(const ArrayType& o) const { return kind == o.kind && shape == o.shape; }
    bool operator!=(const ArrayType& o) const { return !(*this == o); }
    std::string str() const { return std::string(kind_name(kind)) + " " + shape.str(); }
};

enum class TermTag : uint8_t {
    Const,      // literal array
    Var,        // variable reference
    Let,        // let name = a in b
    Cond,       // strict conditional: a rank-0 Bool, branches b/c
    PrimOp,     // broadcasted op over kids
    Index,      // index a at ix
    SumOuter,   // sum along outermost dim of a
    Gather,     // gather shape_arg a fn
    Scatter,    // scatter shape_arg a fn
    Ravel,      // stack kids along new outer dim
    Replicate,  // replicate k a
    Transpose,  // tr perm a
    Reshape,    // reshape shape_arg a
    Build1,     // build1 k (lam name. a)
    Share,      // global sharing marker: share share_id a
    OneHot,     // onehot shape_arg ix a (zeros except a placed at ix)
    Tuple,      // top-level result tuple (wrapper output only)
};

struct Term {
    TermTag tag;

    ConcreteArray literal;       // Const
    std::string name;            // Var ref; Let binder; Build1 binder
    TermPtr a, b, c;             // children (see tags above)
    std::vector<TermPtr> kids;   // PrimOp args, Ravel parts, Tuple parts
    Op op = Op::Add;             // PrimOp
    Shape shape_arg;             // Gather/Scatter/Reshape/OneHot
    std::vector<int> perm;       // Transpose
    int64_t nat = 0;             // Replicate/Build1 size
    IxExpr ix;                   // Index/OneHot
    IxFn fn;                     // Gather/Scatter
    long share_id = 0;           // Share

    // Filled in by check().
    mutable std::optional<ArrayType> type;

    explicit Term(TermTag t) : tag(t) {}
};

// --- constructors -----------------------------------------------------------

TermPtr t_const(ConcreteArray v);
TermPtr t_real(double v);  // rank-0 Real constant
TermPtr t_int(int64_t v);  // rank-0 Int constant
TermPtr t_var(std::string name);
TermPtr t_let(std::string name, TermPtr bound, TermPtr body);
TermPtr t_cond(TermPtr b, TermPtr u, TermPtr v);
TermPtr t_op(Op op, std::vector<TermPtr> args);
TermPtr t_index(TermPtr a, IxExpr ix);
TermPtr t_sum_outer(TermPtr a);
TermPtr t_gather(Shape sh, TermPtr a, IxFn fn);
TermPtr t_scatter(Shape sh, TermPtr a, IxFn fn);
TermPtr t_ravel(std::vector<TermPtr> parts);
TermPtr t_replicate(int64_t k, TermPtr a);
TermPtr t_transpose(std::vector<int> perm, TermPtr a);
TermPtr t_reshape(Shape sh, TermPtr a);
TermPtr t_build1(int64_t k, std::string ixvar, TermPtr body);
TermPtr t_share(long id, TermPtr a);
TermPtr t_one_hot(Shape sh, IxExpr ix, TermPtr v);
TermPtr t_tuple(std::vector<TermPtr> parts);

// --- program files ----------------------------------------------------------

struct Param {
    std::string name;
    ArrayType type;
};

struct Program {
    std::vector<Param> params;
    TermPtr body;
};

// --- utilities --------------------------------------------------------------

std::set<std::string> free_vars(const TermPtr& t);

// Capture-avoiding substitution of free occurrences of `name`.
TermPtr subst(const TermPtr& t, const std::string& name, const TermPtr& replacement);

// Structural equality modulo renaming of bound variables and Share ids.
// Free variables must match by the given correspondence (defaults to equality).
bool alpha_eq(const TermPtr& s, const TermPtr& t,
              const std::map<std::string, std::string>& free_corr = {});

std::string print_term(const TermPtr& t);
std::string print_program(const Program& p);

// Counts Term nodes (index expressions and fn bodies included); Share bodies
// counted once per distinct node.
int64_t term_size(const TermPtr& t);

bool contains_share(const TermPtr& t);
bool contains_build1(const TermPtr& t);

// Checks the sharing discipline on a term: in the main tree no Share occurs
// under a Let and no Let under a Share; index-expression payloads contain no
// Share at all (internal lets there are fine); equal Share ids wrap the
// identical node and ids inside a Share body are strictly smaller.
std::vector<std::string> scan_share_discipline(const TermPtr& t);

// A fresh-name/id source threaded through the transforms.
class IdGen {
public:
    explicit IdGen(long start = 1) : next_(start) {}
    long fresh_id() { return next_++; }
    std::string fresh_name(const std::string& stem) {
        return stem + std::to_string(next_++);
    }
    long peek() const { return next_; }

private:
    long next_;
};

}  // namespace adl
