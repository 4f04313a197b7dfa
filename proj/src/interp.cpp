#include "adl/interp.hpp"

#include <cassert>

namespace adl {

namespace {

struct Interp {
    // Non-null when memoising Share bodies.
    std::map<long, ConcreteArray>* memo = nullptr;
    std::map<long, int>* counts = nullptr;

    ConcreteArray go(const TermPtr& t, const ValueEnv& env) {
        switch (t->tag) {
            case TermTag::Const: return t->literal;
            case TermTag::Var: {
                auto it = env.find(t->name);
                assert(it != env.end() && "unbound variable at evaluation time");
                return it->second;
            }
            case TermTag::Let: {
                ConcreteArray bound = go(t->a, env);
                ValueEnv inner = env;
                inner[t->name] = std::move(bound);
                return go(t->b, inner);
            }
            case TermTag::Cond: {
                // Strict: evaluate all three, then select.
                ConcreteArray b = go(t->a, env);
                ConcreteArray u = go(t->b, env);
                ConcreteArray v = go(t->c, env);
                return b.scalar_b() ? u : v;
            }
            case TermTag::PrimOp: {
                std::vector<ConcreteArray> args;
                args.reserve(t->kids.size());
                for (auto& k : t->kids) args.push_back(go(k, env));
                return map_op(t->op, args);
            }
            case TermTag::Index: {
                ConcreteArray a = go(t->a, env);
                return index(a, eval_ix(t->ix, env));
            }
            case TermTag::SumOuter: return sum_outer(go(t->a, env));
            case TermTag::Gather: {
                ConcreteArray a = go(t->a, env);
                return gather(t->shape_arg, a, (int)t->fn.binders.size(),
                              fn_closure(t->fn, env));
            }
            case TermTag::Scatter: {
                ConcreteArray a = go(t->a, env);
                return scatter(t->shape_arg, a, (int)t->fn.binders.size(),
                               fn_closure(t->fn, env));
            }
            case TermTag::Ravel: {
                std::vector<ConcreteArray> parts;
                parts.reserve(t->kids.size());
                for (auto& k : t->kids) parts.push_back(go(k, env));
                return from_subarrays(parts);
            }
            case TermTag::Replicate: return replicate(t->nat, go(t->a, env));
            case TermTag::Transpose: return transpose(t->perm, go(t->a, env));
            case TermTag::Reshape: return reshape(t->shape_arg, go(t->a, env));
            case TermTag::Build1: {
                std::vector<ConcreteArray> slices;
                slices.reserve((size_t)t->nat);
                for (int64_t i = 0; i < t->nat; ++i) {
                    ValueEnv inner = env;
                    inner[t->name] = ConcreteArray::scalar_int(i);
                    slices.push_back(go(t->a, inner));
                }
                if (slices.empty()) {
                    // rely on the checked annotation for the element shape
                    assert(t->type.has_value() && "empty build1 needs a checked term");
                    return ConcreteArray::zeros(t->type->kind, t->type->shape);
                }
                return from_subarrays(slices);
            }
            case TermTag::Share: {
                if (!memo) return go(t->a, env);
                auto it = memo->find(t->share_id);
                if (it != memo->end()) return it->second;
                ConcreteArray v = go(t->a, env);
                (*counts)[t->share_id] += 1;
                memo->emplace(t->share_id, v);
                return v;
            }
            case TermTag::OneHot: {
                ConcreteArray v = go(t->a, env);
                return one_hot(t->shape_arg, eval_ix(t->ix, env), v);
            }
            case TermTag::Tuple:
                assert(false && "tuple is not a first-class value; use eval_multi");
                return ConcreteArray();
        }
        return ConcreteArray();
    }

    IndexV eval_ix(const IxExpr& ix, const ValueEnv& env) {
        IndexV out;
        out.reserve(ix.size());
        for (auto& c : ix) out.push_back(go(c, env).scalar_i());
        return out;
    }

    std::function<IndexV(const IndexV&)> fn_closure(const IxFn& fn, const ValueEnv& env) {
        return [this, &fn, env](const IndexV& in) {
            ValueEnv inner = env;
            assert(in.size() == fn.binders.size());
            for (size_t i = 0; i < fn.binders.size(); ++i)
                inner[fn.binders[i]] = ConcreteArray::scalar_int(in[i]);
            return eval_ix(fn.body, inner);
        };
    }
};

}  // namespace

ConcreteArray eval(const TermPtr& t, const ValueEnv& env) {
    Interp in;
    return in.go(t, env);
}

MemoResult eval_memo(const TermPtr& t, const ValueEnv& env) {
    std::map<long, ConcreteArray> memo;
    MemoResult r;
    Interp in;
    in.memo = &memo;
    in.counts = &r.share_eval_counts;
    r.value = in.go(t, env);
    return r;
}

std::vector<ConcreteArray> eval_multi(const TermPtr& t, const ValueEnv& env) {
    // walk the let spine so a wrapper-style `let ... in (tuple ...)` works
    TermPtr cur = t;
    ValueEnv scope = env;
    while (cur->tag == TermTag::Let) {
        scope[cur->name] = eval(cur->a, scope);
        cur = cur->b;
    }
    if (cur->tag != TermTag::Tuple) return {eval(t, env)};
    std::vector<ConcreteArray> out;
    out.reserve(cur->kids.size());
    for (auto& k : cur->kids) out.push_back(eval(k, scope));
    return out;
}

namespace {

TermPtr strip(const TermPtr& t) {
    auto strip_ix = [](const IxExpr& ix) {
        IxExpr out;
        out.reserve(ix.size());
        for (auto& c : ix) out.push_back(strip_share(c));
        return out;
    };
    switch (t->tag) {
        case TermTag::Const:
        case TermTag::Var: return t;
        case TermTag::Let: return t_let(t->name, strip(t->a), strip(t->b));
        case TermTag::Cond: return t_cond(strip(t->a), strip(t->b), strip(t->c));
        case TermTag::PrimOp: {
            std::vector<TermPtr> ks;
            for (auto& k : t->kids) ks.push_back(strip(k));
            return t_op(t->op, std::move(ks));
        }
        case TermTag::Index: return t_index(strip(t->a), strip_ix(t->ix));
        case TermTag::SumOuter: return t_sum_outer(strip(t->a));
        case TermTag::Gather: {
            IxFn fn = t->fn;
            fn.body = strip_ix(fn.body);
            return t_gather(t->shape_arg, strip(t->a), fn);
        }
        case TermTag::Scatter: {
            IxFn fn = t->fn;
            fn.body = strip_ix(fn.body);
            return t_scatter(t->shape_arg, strip(t->a), fn);
        }
        case TermTag::Ravel: {
            std::vector<TermPtr> ks;
            for (auto& k : t->kids) ks.push_back(strip(k));
            return t_ravel(std::move(ks));
        }
        case TermTag::Replicate: return t_replicate(t->nat, strip(t->a));
        case TermTag::Transpose: return t_transpose(t->perm, strip(t->a));
        case TermTag::Reshape: return t_reshape(t->shape_arg, strip(t->a));
        case TermTag::Build1: return t_build1(t->nat, t->name, strip(t->a));
        case TermTag::Share: return strip(t->a);
        case TermTag::OneHot: return t_one_hot(t->shape_arg, strip_ix(t->ix), strip(t->a));
        case TermTag::Tuple: {
            std::vector<TermPtr> ks;
            for (auto& k : t->kids) ks.push_back(strip(k));
            return t_tuple(std::move(ks));
        }
    }
    return t;
}

}  // namespace

TermPtr strip_share(const TermPtr& t) { return strip(t); }

}  // namespace adl
