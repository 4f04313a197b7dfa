#include "adl/check.hpp"

#include <set>
#include <unordered_map>

namespace adl {

namespace {

struct Checker {
    // Memo keyed on node identity: shared subtrees (Share bodies, rewrite
    // reuse) are visited once. Sound because transforms freshen binders, so a
    // given node sees one environment per checker run.
    std::unordered_map<const Term*, ArrayType> memo;

    [[noreturn]] static void fail(const char* code, const std::string& msg) {
        throw CheckError(code, msg);
    }

    ArrayType rank0(Kind k) { return ArrayType{k, Shape{}}; }

    void want_rank0_int(const TermPtr& t, const TypeEnv& env, const char* what) {
        ArrayType ty = go(t, env);
        if (ty.kind != Kind::Int || ty.shape.rank() != 0)
            fail("ShapeMismatch", std::string(what) + " must be a rank-0 Int, got " + ty.str());
    }

    void check_fn(const IxFn& fn, const TypeEnv& env) {
        TypeEnv inner = env;
        std::set<std::string> seen;
        for (auto& b : fn.binders) {
            if (!seen.insert(b).second)
                fail("ShapeMismatch", "duplicate index binder " + b);
            inner[b] = rank0(Kind::Int);
        }
        for (auto& c : fn.body) want_rank0_int(c, inner, "index component");
    }

    ArrayType go(const TermPtr& t, const TypeEnv& env) {
        auto it = memo.find(t.get());
        if (it != memo.end()) return it->second;
        ArrayType ty = compute(t, env);
        t->type = ty;
        memo.emplace(t.get(), ty);
        return ty;
    }

    ArrayType compute(const TermPtr& t, const TypeEnv& env) {
        switch (t->tag) {
            case TermTag::Const:
                return ArrayType{t->literal.kind(), t->literal.shape()};
            case TermTag::Var: {
                auto it = env.find(t->name);
                if (it == env.end()) fail("UnboundVar", t->name);
                return it->second;
            }
            case TermTag::Let: {
                ArrayType bound = go(t->a, env);
                TypeEnv inner = env;
                inner[t->name] = bound;
                return go(t->b, inner);
            }
            case TermTag::Cond: {
                ArrayType sc = go(t->a, env);
                if (sc.kind != Kind::Bool || sc.shape.rank() != 0)
                    fail("CondScrutineeNotRank0Bool", "got " + sc.str());
                ArrayType u = go(t->b, env), v = go(t->c, env);
                if (u != v) fail("ShapeMismatch", "cond branches " + u.str() + " vs " + v.str());
                return u;
            }
            case TermTag::PrimOp: {
                size_t arity = op_is_unary(t->op) ? 1 : 2;
                if (t->kids.size() != arity)
                    fail("ShapeMismatch", std::string(op_name(t->op)) + " expects " +
                                              std::to_string(arity) + " arguments");
                ArrayType a0 = go(t->kids[0], env);
                for (size_t i = 1; i < t->kids.size(); ++i) {
                    ArrayType ai = go(t->kids[i], env);
                    if (ai != a0)
                        fail("ShapeMismatch", std::string(op_name(t->op)) + " arguments " +
                                                  a0.str() + " vs " + ai.str());
                }
                if (op_is_comparison(t->op)) {
                    if (a0.kind == Kind::Bool && !(t->op == Op::Eq || t->op == Op::Ne))
                        fail("ShapeMismatch", "ordering comparison on Bool");
                    return ArrayType{Kind::Bool, a0.shape};
                }
                if (a0.kind == Kind::Bool)
                    fail("ShapeMismatch", "arithmetic on Bool");
                if (a0.kind == Kind::Int) {
                    switch (t->op) {
                        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
                        case Op::Mod: case Op::Neg: break;
                        default: fail("ShapeMismatch", std::string(op_name(t->op)) + " on Int");
                    }
                } else if (t->op == Op::Mod) {
                    fail("ShapeMismatch", "mod on Real");
                }
                return a0;
            }
            case TermTag::Index: {
                ArrayType a = go(t->a, env);
                if ((int)t->ix.size() > a.shape.rank())
                    fail("ShapeMismatch", "index of " + std::to_string(t->ix.size()) +
                                              " components into rank " +
                                              std::to_string(a.shape.rank()));
                for (auto& c : t->ix) want_rank0_int(c, env, "index component");
                return ArrayType{a.kind, a.shape.drop((int)t->ix.size())};
            }
            case TermTag::SumOuter: {
                ArrayType a = go(t->a, env);
                if (a.shape.rank() < 1) fail("ShapeMismatch", "sumouter of rank-0 array");
                if (a.kind == Kind::Bool) fail("ShapeMismatch", "sumouter on Bool");
                return ArrayType{a.kind, a.shape.drop(1)};
            }
            case TermTag::Gather: {
                ArrayType a = go(t->a, env);
                int n = a.shape.rank();
                int m1 = (int)t->fn.binders.size();
                int m2 = (int)t->fn.body.size();
                if (m2 > n)
                    fail("ShapeMismatch", "gather consumes " + std::to_string(m2) +
                                              " dims of a rank-" + std::to_string(n) + " source");
                if (t->shape_arg.rank() != m1 + (n - m2))
                    fail("ShapeMismatch", "gather output shape " + t->shape_arg.str() +
                                              " has wrong rank");
                if (t->shape_arg.suffix(n - m2) != a.shape.suffix(n - m2))
                    fail("ShapeMismatch", "gather trailing dims " + t->shape_arg.str() + " vs " +
                                              a.shape.str());
                check_fn(t->fn, env);
                return ArrayType{a.kind, t->shape_arg};
            }
            case TermTag::Scatter: {
                ArrayType a = go(t->a, env);
                if (a.kind == Kind::Bool) fail("ScatterNonNumeric", "scatter on Bool");
                int n = a.shape.rank();
                int m1 = (int)t->fn.binders.size();
                int m2 = (int)t->fn.body.size();
                if (m1 > n)
                    fail("ShapeMismatch", "scatter spreads " + std::to_string(m1) +
                                              " dims of a rank-" + std::to_string(n) + " source");
                if (t->shape_arg.rank() != m2 + (n - m1))
                    fail("ShapeMismatch", "scatter output shape " + t->shape_arg.str() +
                                              " has wrong rank");
                if (t->shape_arg.suffix(n - m1) != a.shape.suffix(n - m1))
                    fail("ShapeMismatch", "scatter trailing dims " + t->shape_arg.str() + " vs " +
                                              a.shape.str());
                check_fn(t->fn, env);
                return ArrayType{a.kind, t->shape_arg};
            }
            case TermTag::Ravel: {
                if (t->kids.empty()) fail("ShapeMismatch", "empty ravel");
                ArrayType a0 = go(t->kids[0], env);
                for (size_t i = 1; i < t->kids.size(); ++i) {
                    ArrayType ai = go(t->kids[i], env);
                    if (ai != a0)
                        fail("ShapeMismatch", "ravel parts " + a0.str() + " vs " + ai.str());
                }
                return ArrayType{a0.kind, a0.shape.cons((int64_t)t->kids.size())};
            }
            case TermTag::Replicate: {
                if (t->nat < 0) fail("ShapeMismatch", "replicate with negative count");
                ArrayType a = go(t->a, env);
                return ArrayType{a.kind, a.shape.cons(t->nat)};
            }
            case TermTag::Transpose: {
                ArrayType a = go(t->a, env);
                int m = (int)t->perm.size();
                if (m > a.shape.rank())
                    fail("PermutationInvalid", "permutation longer than rank");
                std::vector<bool> seen((size_t)m, false);
                for (int p : t->perm) {
                    if (p < 0 || p >= m || seen[(size_t)p])
                        fail("PermutationInvalid", "not a permutation of 0.." + std::to_string(m - 1));
                    seen[(size_t)p] = true;
                }
                Shape sh = a.shape;
                for (int l = 0; l < m; ++l) sh.dims[(size_t)l] = a.shape.dim(t->perm[(size_t)l]);
                return ArrayType{a.kind, sh};
            }
            case TermTag::Reshape: {
                ArrayType a = go(t->a, env);
                if (t->shape_arg.count() != a.shape.count())
                    fail("ReshapeProductMismatch", a.shape.str() + " -> " + t->shape_arg.str());
                return ArrayType{a.kind, t->shape_arg};
            }
            case TermTag::Build1: {
                if (t->nat < 0) fail("ShapeMismatch", "build1 with negative size");
                TypeEnv inner = env;
                inner[t->name] = rank0(Kind::Int);
                ArrayType body = go(t->a, inner);
                return ArrayType{body.kind, body.shape.cons(t->nat)};
            }
            case TermTag::Share:
                return go(t->a, env);
            case TermTag::OneHot: {
                ArrayType v = go(t->a, env);
                int m = (int)t->ix.size();
                if (m > t->shape_arg.rank())
                    fail("ShapeMismatch", "onehot index longer than target rank");
                if (v.shape != t->shape_arg.drop(m))
                    fail("ShapeMismatch", "onehot payload " + v.shape.str() +
                                              " vs residual of " + t->shape_arg.str());
                for (auto& c : t->ix) want_rank0_int(c, env, "onehot index component");
                return ArrayType{v.kind, t->shape_arg};
            }
            case TermTag::Tuple:
                fail("ShapeMismatch", "tuple only allowed at the top level");
        }
        fail("ShapeMismatch", "unhandled node");
    }
};

}  // namespace

ArrayType check(const TermPtr& t, const TypeEnv& env) {
    Checker c;
    return c.go(t, env);
}

TypeEnv env_of_params(const std::vector<Param>& params) {
    TypeEnv env;
    for (auto& p : params) env[p.name] = p.type;
    return env;
}

std::vector<ArrayType> check_program(const Program& p) {
    TypeEnv env = env_of_params(p.params);
    Checker c;
    // the root tuple may sit under a spine of lets (wrapper outputs)
    TermPtr t = p.body;
    TypeEnv spine_env = env;
    while (t->tag == TermTag::Let) {
        spine_env[t->name] = c.go(t->a, spine_env);
        t = t->b;
    }
    if (t->tag == TermTag::Tuple) {
        std::vector<ArrayType> out;
        for (auto& k : t->kids) out.push_back(c.go(k, spine_env));
        return out;
    }
    Checker c2;
    return {c2.go(p.body, env)};
}

}  // namespace adl
