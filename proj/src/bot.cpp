#include "adl/bot.hpp"

#include <cassert>
#include <optional>
#include <stdexcept>

namespace adl {

namespace {

bool occurs_free(const TermPtr& t, const std::string& name) {
    return free_vars(t).count(name) != 0;
}

bool ix_occurs_free(const IxExpr& ix, const std::string& name) {
    for (auto& c : ix)
        if (occurs_free(c, name)) return true;
    return false;
}

// Renames fn binders that collide with any name in `avoid`.
IxFn freshen_fn(const IxFn& fn, const std::set<std::string>& avoid, IdGen& ids) {
    IxFn out = fn;
    for (auto& b : out.binders) {
        if (avoid.count(b)) {
            std::string b2 = ids.fresh_name("i");
            IxExpr body2;
            for (auto& c : out.body) body2.push_back(subst(c, b, t_var(b2)));
            out.body = std::move(body2);
            b = b2;
        }
    }
    return out;
}

struct Rewriter {
    IdGen& ids;
    RewriteOrder order;

    // --- rules that push build1 down (including build1-of-index) -----------

    std::optional<TermPtr> rewrite_build1(const TermPtr& t) {
        int64_t k = t->nat;
        const std::string& iv = t->name;
        const TermPtr& b = t->a;

        // build1 k (\i. i)  ~>  [0 .. k-1]
        if (b->tag == TermTag::Var && b->name == iv)
            return t_const(ConcreteArray::iota(k));
        // constant body  ~>  replicate
        if (!occurs_free(b, iv)) return t_replicate(k, b);

        switch (b->tag) {
            case TermTag::Let: {
                // let x = build1 k (\i. v) in build1 k (\i. u[index x [i]/x])
                std::string x2 = ids.fresh_name("v");
                TermPtr built = t_build1(k, iv, b->a);
                TermPtr u2 = subst(b->b, b->name, t_index(t_var(x2), {t_var(iv)}));
                return t_let(x2, built, t_build1(k, iv, u2));
            }
            case TermTag::Cond: {
                // strict select via ravel/index
                TermPtr sel = t_cond(b->a, t_int(0), t_int(1));
                TermPtr body = t_index(t_ravel({b->b, b->c}), {sel});
                return t_build1(k, iv, body);
            }
            case TermTag::PrimOp: {
                std::vector<TermPtr> kids;
                for (auto& kd : b->kids) kids.push_back(t_build1(k, iv, kd));
                return t_op(b->op, std::move(kids));
            }
            case TermTag::SumOuter:
                return t_sum_outer(t_transpose({1, 0}, t_build1(k, iv, b->a)));
            case TermTag::Gather:
            case TermTag::Scatter: {
                IxFn fn = freshen_fn(b->fn, {iv}, ids);
                IxFn fn2;
                fn2.binders.push_back(iv);
                fn2.binders.insert(fn2.binders.end(), fn.binders.begin(), fn.binders.end());
                fn2.body.push_back(t_var(iv));
                fn2.body.insert(fn2.body.end(), fn.body.begin(), fn.body.end());
                TermPtr src = t_build1(k, iv, b->a);
                Shape sh = b->shape_arg.cons(k);
                return b->tag == TermTag::Gather ? t_gather(sh, src, fn2)
                                                 : t_scatter(sh, src, fn2);
            }
            case TermTag::Ravel: {
                std::vector<TermPtr> parts;
                for (auto& p : b->kids) parts.push_back(t_build1(k, iv, p));
                return t_transpose({1, 0}, t_ravel(std::move(parts)));
            }
            case TermTag::Replicate:
                return t_transpose({1, 0}, t_replicate(b->nat, t_build1(k, iv, b->a)));
            case TermTag::Transpose: {
                std::vector<int> perm;
                perm.push_back(0);
                for (int p : b->perm) perm.push_back(p + 1);
                return t_transpose(std::move(perm), t_build1(k, iv, b->a));
            }
            case TermTag::Reshape:
                return t_reshape(b->shape_arg.cons(k), t_build1(k, iv, b->a));
            case TermTag::Index: {
                // build1-of-index: commute below index, turning it into gather
                const TermPtr& u = b->a;
                assert(b->type.has_value());
                Shape out_sh = b->type->shape.cons(k);
                if ((u->tag == TermTag::Var && u->name != iv) || u->tag == TermTag::Const) {
                    IxFn fn{{iv}, b->ix};
                    return t_gather(out_sh, u, fn);
                }
                if (u->tag == TermTag::Ravel && b->ix.size() == 1) {
                    IxFn fn{{iv}, {t_var(iv), b->ix[0]}};
                    return t_gather(out_sh, t_build1(k, iv, u), fn);
                }
                if (u->tag == TermTag::Scatter && !b->ix.empty()) {
                    IxFn fn{{iv}, {}};
                    fn.body.push_back(t_var(iv));
                    fn.body.insert(fn.body.end(), b->ix.begin(), b->ix.end());
                    return t_gather(out_sh, t_build1(k, iv, u), fn);
                }
                return std::nullopt;  // index itself must be rewritten first
            }
            default: return std::nullopt;
        }
    }

    // --- rules that push index down ------------------------------------------

    // Wraps each index component in a binding of `name`; trivial lets are
    // inlined in a separate cleanup pass.
    IxExpr bind_in_components(const IxExpr& ix, const std::string& name, const TermPtr& val) {
        IxExpr out;
        out.reserve(ix.size());
        for (auto& c : ix)
            out.push_back(occurs_free(c, name) ? t_let(name, val, c) : c);
        return out;
    }

    std::optional<TermPtr> rewrite_index(const TermPtr& t) {
        const TermPtr& u = t->a;
        const IxExpr& ix = t->ix;

        // index t [] ~> t
        if (ix.empty()) return u;

        switch (u->tag) {
            case TermTag::Index: {
                IxExpr merged = u->ix;
                merged.insert(merged.end(), ix.begin(), ix.end());
                return t_index(u->a, std::move(merged));
            }
            case TermTag::Let: {
                if (ix_occurs_free(ix, u->name)) {
                    std::string x2 = ids.fresh_name("v");
                    TermPtr body = subst(u->b, u->name, t_var(x2));
                    return t_let(x2, u->a, t_index(body, ix));
                }
                return t_let(u->name, u->a, t_index(u->b, ix));
            }
            case TermTag::Cond: {
                IxExpr names;
                TermPtr result;
                std::vector<std::pair<std::string, TermPtr>> binds;
                for (auto& c : ix) {
                    std::string n = ids.fresh_name("j");
                    binds.emplace_back(n, c);
                    names.push_back(t_var(n));
                }
                result = t_cond(u->a, t_index(u->b, names), t_index(u->c, names));
                for (auto it = binds.rbegin(); it != binds.rend(); ++it)
                    result = t_let(it->first, it->second, result);
                return result;
            }
            case TermTag::PrimOp: {
                if (u->kids.size() == 1) return t_op(u->op, {t_index(u->kids[0], ix)});
                IxExpr names;
                std::vector<std::pair<std::string, TermPtr>> binds;
                for (auto& c : ix) {
                    std::string n = ids.fresh_name("j");
                    binds.emplace_back(n, c);
                    names.push_back(t_var(n));
                }
                std::vector<TermPtr> kids;
                for (auto& kd : u->kids) kids.push_back(t_index(kd, names));
                TermPtr result = t_op(u->op, std::move(kids));
                for (auto it = binds.rbegin(); it != binds.rend(); ++it)
                    result = t_let(it->first, it->second, result);
                return result;
            }
            case TermTag::SumOuter: {
                int n = (int)ix.size();
                std::vector<int> perm;
                for (int j = 1; j <= n; ++j) perm.push_back(j);
                perm.push_back(0);
                return t_sum_outer(t_index(t_transpose(perm, u->a), ix));
            }
            case TermTag::Ravel: {
                if (ix.size() == 1) return std::nullopt;  // normal form
                IxExpr names;
                std::vector<std::pair<std::string, TermPtr>> binds;
                for (size_t j = 1; j < ix.size(); ++j) {
                    std::string n = ids.fresh_name("j");
                    binds.emplace_back(n, ix[j]);
                    names.push_back(t_var(n));
                }
                std::vector<TermPtr> parts;
                for (auto& p : u->kids) parts.push_back(t_index(p, names));
                TermPtr result = t_index(t_ravel(std::move(parts)), {ix[0]});
                for (auto it = binds.rbegin(); it != binds.rend(); ++it)
                    result = t_let(it->first, it->second, result);
                return result;
            }
            case TermTag::Replicate: {
                IxExpr rest(ix.begin() + 1, ix.end());
                return t_index(u->a, std::move(rest));
            }
            case TermTag::Transpose: {
                assert(u->type.has_value());
                int m = (int)u->perm.size();
                std::vector<int> inv = inverse_permutation(u->perm);
                std::vector<std::string> names;
                for (int j = 0; j < m; ++j) names.push_back(ids.fresh_name("i"));
                IxFn fn;
                fn.binders = names;  // binder j ranges over output dim j
                for (int l = 0; l < m; ++l) fn.body.push_back(t_var(names[(size_t)inv[(size_t)l]]));
                return t_index(t_gather(u->type->shape, u->a, fn), ix);
            }
            case TermTag::Reshape: {
                assert(u->a->type.has_value());
                const Shape& src = u->a->type->shape;
                const Shape& dst = u->shape_arg;
                IxFn fn;
                for (int j = 0; j < dst.rank(); ++j) fn.binders.push_back(ids.fresh_name("i"));
                // linearise the destination index (row-major)
                TermPtr lin = t_int(0);
                bool first = true;
                int64_t stride = 1;
                std::vector<TermPtr> terms;
                {
                    std::vector<int64_t> strides((size_t)dst.rank());
                    for (int j = dst.rank() - 1; j >= 0; --j) {
                        strides[(size_t)j] = stride;
                        stride *= dst.dim(j);
                    }
                    for (int j = 0; j < dst.rank(); ++j) {
                        TermPtr term = strides[(size_t)j] == 1
                                           ? t_var(fn.binders[(size_t)j])
                                           : t_op(Op::Mul, {t_var(fn.binders[(size_t)j]),
                                                            t_int(strides[(size_t)j])});
                        lin = first ? term : t_op(Op::Add, {lin, term});
                        first = false;
                    }
                    if (first) lin = t_int(0);
                }
                // de-linearise into the source shape; each component gets its
                // own binding of the linear index (components cannot share)
                std::vector<int64_t> sstr((size_t)src.rank());
                int64_t acc = 1;
                for (int j = src.rank() - 1; j >= 0; --j) {
                    sstr[(size_t)j] = acc;
                    acc *= src.dim(j);
                }
                for (int j = 0; j < src.rank(); ++j) {
                    std::string ln = ids.fresh_name("l");
                    TermPtr lv = t_var(ln);
                    TermPtr comp = sstr[(size_t)j] == 1
                                       ? lv
                                       : t_op(Op::Div, {lv, t_int(sstr[(size_t)j])});
                    if (j > 0) comp = t_op(Op::Mod, {comp, t_int(src.dim(j))});
                    fn.body.push_back(t_let(ln, lin, comp));
                }
                return t_index(t_gather(dst, u->a, fn), ix);
            }
            case TermTag::Gather: {
                if (u->fn.binders.empty())
                    return t_index(t_index(u->a, u->fn.body), ix);
                // consume the first index component into the gather's fn
                TermPtr u1 = ix[0];
                IxFn fn = u->fn;
                std::string consumed = fn.binders.front();
                fn.binders.erase(fn.binders.begin());
                fn = freshen_fn(fn, free_vars(u1), ids);
                fn.body = bind_in_components(fn.body, consumed, u1);
                IxExpr rest(ix.begin() + 1, ix.end());
                return t_index(t_gather(u->shape_arg.drop(1), u->a, fn), std::move(rest));
            }
            default:
                return std::nullopt;  // Var, Const, Scatter heads are normal forms
        }
    }

    std::optional<TermPtr> match(const TermPtr& t) {
        if (t->tag == TermTag::Build1) return rewrite_build1(t);
        if (t->tag == TermTag::Index) return rewrite_index(t);
        return std::nullopt;
    }

    // One rewrite step anywhere in the term, honoring the chosen order.
    std::optional<TermPtr> step(const TermPtr& t) {
        if (order == RewriteOrder::Outermost) {
            if (auto r = match(t)) return r;
            return step_children(t);
        }
        if (auto r = step_children(t)) return r;
        return match(t);
    }

    bool step_ix(const IxExpr& ix, IxExpr& out) {
        for (size_t i = 0; i < ix.size(); ++i) {
            if (auto r = step(ix[i])) {
                out = ix;
                out[i] = *r;
                return true;
            }
        }
        return false;
    }

    std::optional<TermPtr> step_children(const TermPtr& t) {
        auto ch = [&](const TermPtr& c) { return step(c); };
        switch (t->tag) {
            case TermTag::Const:
            case TermTag::Var: return std::nullopt;
            case TermTag::Let:
                if (auto r = ch(t->a)) return t_let(t->name, *r, t->b);
                if (auto r = ch(t->b)) return t_let(t->name, t->a, *r);
                return std::nullopt;
            case TermTag::Cond:
                if (auto r = ch(t->a)) return t_cond(*r, t->b, t->c);
                if (auto r = ch(t->b)) return t_cond(t->a, *r, t->c);
                if (auto r = ch(t->c)) return t_cond(t->a, t->b, *r);
                return std::nullopt;
            case TermTag::PrimOp:
            case TermTag::Ravel:
            case TermTag::Tuple:
                for (size_t i = 0; i < t->kids.size(); ++i) {
                    if (auto r = ch(t->kids[i])) {
                        std::vector<TermPtr> kids = t->kids;
                        kids[i] = *r;
                        if (t->tag == TermTag::PrimOp) return t_op(t->op, std::move(kids));
                        if (t->tag == TermTag::Ravel) return t_ravel(std::move(kids));
                        return t_tuple(std::move(kids));
                    }
                }
                return std::nullopt;
            case TermTag::Index: {
                if (auto r = ch(t->a)) return t_index(*r, t->ix);
                IxExpr ix2;
                if (step_ix(t->ix, ix2)) return t_index(t->a, std::move(ix2));
                return std::nullopt;
            }
            case TermTag::SumOuter:
                if (auto r = ch(t->a)) return t_sum_outer(*r);
                return std::nullopt;
            case TermTag::Gather:
            case TermTag::Scatter: {
                if (auto r = ch(t->a))
                    return t->tag == TermTag::Gather ? t_gather(t->shape_arg, *r, t->fn)
                                                     : t_scatter(t->shape_arg, *r, t->fn);
                IxExpr body2;
                if (step_ix(t->fn.body, body2)) {
                    IxFn fn = t->fn;
                    fn.body = std::move(body2);
                    return t->tag == TermTag::Gather ? t_gather(t->shape_arg, t->a, fn)
                                                     : t_scatter(t->shape_arg, t->a, fn);
                }
                return std::nullopt;
            }
            case TermTag::Replicate:
                if (auto r = ch(t->a)) return t_replicate(t->nat, *r);
                return std::nullopt;
            case TermTag::Transpose:
                if (auto r = ch(t->a)) return t_transpose(t->perm, *r);
                return std::nullopt;
            case TermTag::Reshape:
                if (auto r = ch(t->a)) return t_reshape(t->shape_arg, *r);
                return std::nullopt;
            case TermTag::Build1:
                if (auto r = ch(t->a)) return t_build1(t->nat, t->name, *r);
                return std::nullopt;
            case TermTag::Share:
            case TermTag::OneHot:
                throw std::runtime_error("normalize: Share/OneHot not part of the source language");
        }
        return std::nullopt;
    }
};

TermPtr simplify_pass(const TermPtr& t);

TermPtr simplify_children(const TermPtr& t) {
    auto s = [](const TermPtr& c) { return simplify_pass(c); };
    switch (t->tag) {
        case TermTag::Const:
        case TermTag::Var: return t;
        case TermTag::Let: return t_let(t->name, s(t->a), s(t->b));
        case TermTag::Cond: return t_cond(s(t->a), s(t->b), s(t->c));
        case TermTag::PrimOp: {
            std::vector<TermPtr> kids;
            for (auto& k : t->kids) kids.push_back(s(k));
            return t_op(t->op, std::move(kids));
        }
        case TermTag::Index: {
            IxExpr ix;
            for (auto& c : t->ix) ix.push_back(s(c));
            return t_index(s(t->a), std::move(ix));
        }
        case TermTag::SumOuter: return t_sum_outer(s(t->a));
        case TermTag::Gather:
        case TermTag::Scatter: {
            IxFn fn = t->fn;
            IxExpr body;
            for (auto& c : fn.body) body.push_back(s(c));
            fn.body = std::move(body);
            return t->tag == TermTag::Gather ? t_gather(t->shape_arg, s(t->a), fn)
                                             : t_scatter(t->shape_arg, s(t->a), fn);
        }
        case TermTag::Ravel: {
            std::vector<TermPtr> kids;
            for (auto& k : t->kids) kids.push_back(s(k));
            return t_ravel(std::move(kids));
        }
        case TermTag::Replicate: return t_replicate(t->nat, s(t->a));
        case TermTag::Transpose: return t_transpose(t->perm, s(t->a));
        case TermTag::Reshape: return t_reshape(t->shape_arg, s(t->a));
        case TermTag::Build1: return t_build1(t->nat, t->name, s(t->a));
        default: return t;
    }
}

bool is_identity_fn(const IxFn& fn) {
    if (fn.binders.size() != fn.body.size()) return false;
    for (size_t i = 0; i < fn.binders.size(); ++i) {
        if (fn.body[i]->tag != TermTag::Var || fn.body[i]->name != fn.binders[i]) return false;
    }
    return true;
}

bool is_identity_perm(const std::vector<int>& perm) {
    for (size_t i = 0; i < perm.size(); ++i)
        if (perm[i] != (int)i) return false;
    return true;
}

TermPtr simplify_pass(const TermPtr& t) {
    TermPtr r = simplify_children(t);
    if (r->tag == TermTag::Gather && is_identity_fn(r->fn) && r->a->type.has_value() &&
        r->a->type->shape == r->shape_arg)
        return r->a;
    if (r->tag == TermTag::Transpose && is_identity_perm(r->perm)) return r->a;
    if (r->tag == TermTag::Reshape && r->a->type.has_value() &&
        r->a->type->shape == r->shape_arg)
        return r->a;
    return r;
}

}  // namespace

TermPtr inline_let_of_var(const TermPtr& t) {
    if (t->tag == TermTag::Let) {
        TermPtr bound = inline_let_of_var(t->a);
        if (bound->tag == TermTag::Var)
            return inline_let_of_var(subst(t->b, t->name, bound));
        return t_let(t->name, bound, inline_let_of_var(t->b));
    }
    // reuse the generic child walker from the simplifier
    auto s = [](const TermPtr& c) { return inline_let_of_var(c); };
    switch (t->tag) {
        case TermTag::Const:
        case TermTag::Var: return t;
        case TermTag::Cond: return t_cond(s(t->a), s(t->b), s(t->c));
        case TermTag::PrimOp: {
            std::vector<TermPtr> kids;
            for (auto& k : t->kids) kids.push_back(s(k));
            return t_op(t->op, std::move(kids));
        }
        case TermTag::Index: {
            IxExpr ix;
            for (auto& c : t->ix) ix.push_back(s(c));
            return t_index(s(t->a), std::move(ix));
        }
        case TermTag::SumOuter: return t_sum_outer(s(t->a));
        case TermTag::Gather:
        case TermTag::Scatter: {
            IxFn fn = t->fn;
            IxExpr body;
            for (auto& c : fn.body) body.push_back(s(c));
            fn.body = std::move(body);
            return t->tag == TermTag::Gather ? t_gather(t->shape_arg, s(t->a), fn)
                                             : t_scatter(t->shape_arg, s(t->a), fn);
        }
        case TermTag::Ravel: {
            std::vector<TermPtr> kids;
            for (auto& k : t->kids) kids.push_back(s(k));
            return t_ravel(std::move(kids));
        }
        case TermTag::Replicate: return t_replicate(t->nat, s(t->a));
        case TermTag::Transpose: return t_transpose(t->perm, s(t->a));
        case TermTag::Reshape: return t_reshape(t->shape_arg, s(t->a));
        case TermTag::Build1: return t_build1(t->nat, t->name, s(t->a));
        case TermTag::Tuple: {
            std::vector<TermPtr> kids;
            for (auto& k : t->kids) kids.push_back(s(k));
            return t_tuple(std::move(kids));
        }
        default: return t;
    }
}

TermPtr normalize(const TermPtr& t, const TypeEnv& env, IdGen& ids, const BotOptions& opts) {
    int max_rank = 0;
    for (auto& [_, ty] : env) max_rank = std::max(max_rank, ty.shape.rank());
    int64_t budget = opts.max_steps;
    if (budget == 0) budget = 4096 + 256 * term_size(t) * (max_rank + 2);

    Rewriter rw{ids, opts.order};
    TermPtr cur = t;
    check(cur, env);
    int64_t steps = 0;
    for (;;) {
        auto next = rw.step(cur);
        if (!next) break;
        cur = *next;
        check(cur, env);  // refresh shape annotations for the next match
        if (++steps > budget)
            throw std::runtime_error("normalize: step budget exceeded (non-termination?)");
    }
    cur = inline_let_of_var(cur);
    check(cur, env);
    if (opts.simplify) {
        cur = simplify_pass(cur);
        check(cur, env);
    }
    return cur;
}

namespace {

void nf_walk(const TermPtr& t, NormalFormReport& rep) {
    if (t->tag == TermTag::Build1) {
        ++rep.build1_count;
        rep.violations.push_back("build1 present: " + print_term(t).substr(0, 60));
    }
    if (t->tag == TermTag::Index) {
        ++rep.index_count;
        const TermPtr& u = t->a;
        bool allowed = false;
        if (u->tag == TermTag::Var || u->tag == TermTag::Const || u->tag == TermTag::Scatter)
            allowed = !t->ix.empty();
        else if (u->tag == TermTag::Ravel)
            allowed = t->ix.size() == 1;
        if (!allowed)
            rep.violations.push_back("disallowed index head: " + print_term(t).substr(0, 80));
    }
    auto walk_ix = [&](const IxExpr& ix) {
        for (auto& c : ix) nf_walk(c, rep);
    };
    if (t->a) nf_walk(t->a, rep);
    if (t->b) nf_walk(t->b, rep);
    if (t->c) nf_walk(t->c, rep);
    for (auto& k : t->kids) nf_walk(k, rep);
    walk_ix(t->ix);
    walk_ix(t->fn.body);
}

}  // namespace

NormalFormReport check_normal_form(const TermPtr& t) {
    NormalFormReport rep;
    nf_walk(t, rep);
    return rep;
}

}  // namespace adl
