#include "adl/symbolic.hpp"

#include <cassert>
#include <set>

#include "adl/interp.hpp"

namespace adl {

TermPtr DualTerm::primal_term() const {
    TermPtr t = primal;
    for (auto it = primal_binds.rbegin(); it != primal_binds.rend(); ++it)
        t = t_let(it->first, it->second, t);
    return t;
}

namespace {

struct SymInfo {
    TermPtr ref;     // Var or Const
    SymDelta delta;  // null for discrete kinds
};

struct SymDualize {
    IdGen& ids;
    std::vector<std::pair<std::string, TermPtr>>& binds;
    std::map<std::string, SymInfo> env;

    struct Dual {
        TermPtr primal;
        SymDelta delta;
    };

    bool is_real(const TermPtr& t) const {
        assert(t->type.has_value());
        return t->type->kind == Kind::Real;
    }

    // Binds a primal computation so it can be referenced by name; variables
    // and literals are already references.
    TermPtr bind_term(TermPtr t) {
        if (t->tag == TermTag::Var || t->tag == TermTag::Const) return t;
        std::string n = "x" + std::to_string(ids.fresh_id());
        binds.emplace_back(n, std::move(t));
        return t_var(n);
    }

    SymDelta share(SymDelta d) { return d_share<SymbolicCarrier>(ids.fresh_id(), std::move(d)); }

    TermPtr ones(const Shape& sh, double v) {
        return t_const(ConcreteArray::from_reals(sh, std::vector<double>((size_t)sh.count(), v)));
    }

    // The non-differentiating transform: keeps the term as-is but redirects
    // its free variables to the primal bindings.
    TermPtr nd(const TermPtr& t, std::set<std::string>& locals) {
        switch (t->tag) {
            case TermTag::Const: return t;
            case TermTag::Var: {
                if (locals.count(t->name)) return t;
                auto it = env.find(t->name);
                assert(it != env.end());
                return it->second.ref;
            }
            case TermTag::Let: {
                TermPtr bound = nd(t->a, locals);
                bool fresh = locals.insert(t->name).second;
                TermPtr body = nd(t->b, locals);
                if (fresh) locals.erase(t->name);
                return t_let(t->name, bound, body);
            }
            case TermTag::Cond:
                return t_cond(nd(t->a, locals), nd(t->b, locals), nd(t->c, locals));
            case TermTag::PrimOp: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(nd(k, locals));
                return t_op(t->op, std::move(kids));
            }
            case TermTag::Index: return t_index(nd(t->a, locals), nd_ix(t->ix, locals));
            case TermTag::SumOuter: return t_sum_outer(nd(t->a, locals));
            case TermTag::Gather:
                return t_gather(t->shape_arg, nd(t->a, locals), nd_fn(t->fn, locals));
            case TermTag::Scatter:
                return t_scatter(t->shape_arg, nd(t->a, locals), nd_fn(t->fn, locals));
            case TermTag::Ravel: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(nd(k, locals));
                return t_ravel(std::move(kids));
            }
            case TermTag::Replicate: return t_replicate(t->nat, nd(t->a, locals));
            case TermTag::Transpose: return t_transpose(t->perm, nd(t->a, locals));
            case TermTag::Reshape: return t_reshape(t->shape_arg, nd(t->a, locals));
            default:
                throw CheckError("ShapeMismatch", "node not in the BOT-normal language");
        }
    }

    IxExpr nd_ix(const IxExpr& ix, std::set<std::string>& locals) {
        IxExpr out;
        out.reserve(ix.size());
        for (auto& c : ix) out.push_back(nd(c, locals));
        return out;
    }

    IxFn nd_fn(const IxFn& fn, std::set<std::string>& locals) {
        IxFn out;
        out.binders = fn.binders;
        std::vector<std::string> added;
        for (auto& b : fn.binders)
            if (locals.insert(b).second) added.push_back(b);
        out.body = nd_ix(fn.body, locals);
        for (auto& b : added) locals.erase(b);
        return out;
    }

    TermPtr nd_top(const TermPtr& t) {
        std::set<std::string> locals;
        return nd(t, locals);
    }

    Dual go_any(const TermPtr& t) {
        if (is_real(t)) return go(t);
        return Dual{nd_top(t), nullptr};
    }

    Dual go(const TermPtr& t) {
        const Shape& sh = t->type->shape;
        switch (t->tag) {
            case TermTag::Const:
                return Dual{t, d_zero<SymbolicCarrier>(sh)};
            case TermTag::Var: {
                auto it = env.find(t->name);
                assert(it != env.end() && it->second.delta);
                return Dual{it->second.ref, it->second.delta};
            }
            case TermTag::Let: {
                Dual bound = go_any(t->a);
                SymInfo info{bind_term(bound.primal), bound.delta};
                auto saved = env.find(t->name) != env.end() ? std::optional<SymInfo>(env[t->name])
                                                            : std::nullopt;
                env[t->name] = info;
                Dual r = go(t->b);
                if (saved) env[t->name] = *saved; else env.erase(t->name);
                return r;
            }
            case TermTag::Cond: {
                TermPtr b = bind_term(nd_top(t->a));
                Dual u = go(t->b);
                Dual v = go(t->c);
                TermPtr primal = t_cond(b, u.primal, v.primal);
                SymDelta lit = d_lit_array<SymbolicCarrier>({u.delta, v.delta});
                IxExpr sel{t_cond(b, t_int(0), t_int(1))};
                return Dual{primal, share(d_index<SymbolicCarrier>(lit, std::move(sel), 1))};
            }
            case TermTag::PrimOp: {
                if (op_is_unary(t->op)) {
                    Dual x = go(t->kids[0]);
                    switch (t->op) {
                        case Op::Neg:
                            return Dual{t_op(Op::Neg, {x.primal}),
                                        share(d_scale<SymbolicCarrier>(ones(sh, -1.0), x.delta))};
                        case Op::Sin: {
                            TermPtr r = bind_term(x.primal);
                            TermPtr pay = bind_term(t_op(Op::Cos, {r}));
                            return Dual{t_op(Op::Sin, {r}),
                                        share(d_scale<SymbolicCarrier>(pay, x.delta))};
                        }
                        case Op::Cos: {
                            TermPtr r = bind_term(x.primal);
                            TermPtr pay = bind_term(t_op(Op::Neg, {t_op(Op::Sin, {r})}));
                            return Dual{t_op(Op::Cos, {r}),
                                        share(d_scale<SymbolicCarrier>(pay, x.delta))};
                        }
                        case Op::Exp: {
                            TermPtr res = bind_term(t_op(Op::Exp, {x.primal}));
                            return Dual{res, share(d_scale<SymbolicCarrier>(res, x.delta))};
                        }
                        case Op::Log: {
                            TermPtr r = bind_term(x.primal);
                            TermPtr pay = bind_term(t_op(Op::Div, {ones(sh, 1.0), r}));
                            return Dual{t_op(Op::Log, {r}),
                                        share(d_scale<SymbolicCarrier>(pay, x.delta))};
                        }
                        case Op::Sqrt: {
                            TermPtr res = bind_term(t_op(Op::Sqrt, {x.primal}));
                            TermPtr pay = bind_term(t_op(Op::Div, {ones(sh, 0.5), res}));
                            return Dual{res, share(d_scale<SymbolicCarrier>(pay, x.delta))};
                        }
                        case Op::Tanh: {
                            TermPtr res = bind_term(t_op(Op::Tanh, {x.primal}));
                            TermPtr pay = bind_term(
                                t_op(Op::Sub, {ones(sh, 1.0), t_op(Op::Mul, {res, res})}));
                            return Dual{res, share(d_scale<SymbolicCarrier>(pay, x.delta))};
                        }
                        default: throw CheckError("ShapeMismatch", "unary derivative");
                    }
                }
                Dual x1 = go(t->kids[0]);
                Dual x2 = go(t->kids[1]);
                switch (t->op) {
                    case Op::Add:
                        return Dual{t_op(Op::Add, {x1.primal, x2.primal}),
                                    share(d_add(x1.delta, x2.delta))};
                    case Op::Sub:
                        return Dual{t_op(Op::Sub, {x1.primal, x2.primal}),
                                    share(d_add(x1.delta, d_scale<SymbolicCarrier>(
                                                              ones(sh, -1.0), x2.delta)))};
                    case Op::Mul: {
                        TermPtr r1 = bind_term(x1.primal);
                        TermPtr r2 = bind_term(x2.primal);
                        return Dual{t_op(Op::Mul, {r1, r2}),
                                    share(d_add(d_scale<SymbolicCarrier>(r2, x1.delta),
                                                d_scale<SymbolicCarrier>(r1, x2.delta)))};
                    }
                    case Op::Div: {
                        TermPtr r1 = bind_term(x1.primal);
                        TermPtr r2 = bind_term(x2.primal);
                        TermPtr pay1 = bind_term(t_op(Op::Div, {ones(sh, 1.0), r2}));
                        TermPtr pay2 = bind_term(
                            t_op(Op::Neg, {t_op(Op::Div, {r1, t_op(Op::Mul, {r2, r2})})}));
                        return Dual{t_op(Op::Div, {r1, r2}),
                                    share(d_add(d_scale<SymbolicCarrier>(pay1, x1.delta),
                                                d_scale<SymbolicCarrier>(pay2, x2.delta)))};
                    }
                    default: throw CheckError("ShapeMismatch", "binary derivative");
                }
            }
            case TermTag::Index: {
                Dual x = go(t->a);
                std::set<std::string> locals;
                IxExpr ixnd = nd_ix(t->ix, locals);
                return Dual{t_index(x.primal, ixnd),
                            share(d_index<SymbolicCarrier>(x.delta, ixnd, (int)ixnd.size()))};
            }
            case TermTag::SumOuter: {
                Dual x = go(t->a);
                return Dual{t_sum_outer(x.primal), share(d_sum_outer(x.delta))};
            }
            case TermTag::Gather: {
                Dual x = go(t->a);
                std::set<std::string> locals;
                IxFn fn = nd_fn(t->fn, locals);
                return Dual{t_gather(t->shape_arg, x.primal, fn),
                            share(d_gather<SymbolicCarrier>(t->shape_arg, x.delta, fn))};
            }
            case TermTag::Scatter: {
                Dual x = go(t->a);
                std::set<std::string> locals;
                IxFn fn = nd_fn(t->fn, locals);
                return Dual{t_scatter(t->shape_arg, x.primal, fn),
                            share(d_scatter<SymbolicCarrier>(t->shape_arg, x.delta, fn))};
            }
            case TermTag::Ravel: {
                std::vector<TermPtr> prims;
                std::vector<SymDelta> ds;
                for (auto& k : t->kids) {
                    Dual x = go(k);
                    prims.push_back(x.primal);
                    ds.push_back(x.delta);
                }
                return Dual{t_ravel(std::move(prims)), share(d_lit_array(std::move(ds)))};
            }
            case TermTag::Replicate: {
                Dual x = go(t->a);
                return Dual{t_replicate(t->nat, x.primal), share(d_replicate(t->nat, x.delta))};
            }
            case TermTag::Transpose: {
                Dual x = go(t->a);
                return Dual{t_transpose(t->perm, x.primal), share(d_transpose(t->perm, x.delta))};
            }
            case TermTag::Reshape: {
                Dual x = go(t->a);
                return Dual{t_reshape(t->shape_arg, x.primal),
                            share(d_reshape(t->shape_arg, x.delta))};
            }
            case TermTag::Build1:
                throw CheckError("ContainsBuild1", "run the bulk-operation transform first");
            default:
                throw CheckError("ShapeMismatch", "node not supported by dualization");
        }
    }
};

}  // namespace

DualTerm dualize(const TermPtr& t, const std::vector<Param>& params, IdGen& ids) {
    assert(t->type.has_value());
    if (t->type->kind != Kind::Real || t->type->shape.rank() != 0)
        throw CheckError("NonScalarOutput", "dualize needs a rank-0 Real result, got " +
                                                t->type->str());
    if (contains_build1(t))
        throw CheckError("ContainsBuild1", "run the bulk-operation transform first");
    DualTerm out;
    SymDualize sd{ids, out.primal_binds, {}};
    int next_dvar = 1;
    for (auto& p : params) {
        SymInfo info;
        info.ref = t_var(p.name);
        if (p.type.kind == Kind::Real) {
            DVarName v{next_dvar++, p.type.shape};
            info.delta = d_input<SymbolicCarrier>(v);
            out.real_inputs.emplace_back(p.name, v);
        }
        sd.env[p.name] = info;
    }
    auto r = sd.go(t);
    out.primal = r.primal;
    out.dual = r.delta;
    return out;
}

std::map<int, TermPtr> sym_reverse_pass(IdGen& ids, const TermPtr& c, const SymDelta& d) {
    assert((c->tag == TermTag::Var || c->tag == TermTag::Const) &&
           "initial cotangent must be a variable reference or constant");
    SymbolicPolicy pol{ids};
    auto rr = reverse_pass(pol, c, d);
    return rr.grad;
}

// --- unshare / stackLets ------------------------------------------------------

namespace {

std::string share_var_name(long id) { return "s" + std::to_string(id); }

struct Unshare {
    UnshareMap m;

    TermPtr go(const TermPtr& t) {
        switch (t->tag) {
            case TermTag::Var:
            case TermTag::Const: return t;
            case TermTag::Share: {
                auto it = m.find(t->share_id);
                if (it != m.end()) return t_var(it->second.first);
                std::string name = share_var_name(t->share_id);
                TermPtr body = go(t->a);
                m.emplace(t->share_id, std::make_pair(name, body));
                return t_var(name);
            }
            case TermTag::PrimOp: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(go(k));
                return t_op(t->op, std::move(kids));
            }
            case TermTag::OneHot: return t_one_hot(t->shape_arg, t->ix, go(t->a));
            case TermTag::Replicate: return t_replicate(t->nat, go(t->a));
            case TermTag::Scatter: return t_scatter(t->shape_arg, go(t->a), t->fn);
            case TermTag::Gather: return t_gather(t->shape_arg, go(t->a), t->fn);
            case TermTag::Index: return t_index(go(t->a), t->ix);
            case TermTag::SumOuter: return t_sum_outer(go(t->a));
            case TermTag::Transpose: return t_transpose(t->perm, go(t->a));
            case TermTag::Reshape: return t_reshape(t->shape_arg, go(t->a));
            case TermTag::Cond: return t_cond(go(t->a), go(t->b), go(t->c));
            case TermTag::Ravel: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(go(k));
                return t_ravel(std::move(kids));
            }
            case TermTag::Tuple: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(go(k));
                return t_tuple(std::move(kids));
            }
            case TermTag::Let:
            case TermTag::Build1:
                throw CheckError("ShapeMismatch",
                                 "unshare input may not contain let or build1");
        }
        return t;
    }
};

}  // namespace

std::pair<UnshareMap, TermPtr> unshare(UnshareMap m, const TermPtr& t) {
    Unshare u{std::move(m)};
    TermPtr t2 = u.go(t);
    return {std::move(u.m), t2};
}

TermPtr stack_lets(const UnshareMap& m, const TermPtr& t) {
    TermPtr out = t;
    for (auto it = m.rbegin(); it != m.rend(); ++it)  // bind lowest id outermost
        out = t_let(it->second.first, it->second.second, out);
    return out;
}

TermPtr share_to_let(const TermPtr& t) {
    auto [m, t2] = unshare({}, t);
    return stack_lets(m, t2);
}

// --- full wrapper --------------------------------------------------------------

namespace {

constexpr int kTopScope = -1;

// Share conversion over several sibling components (the gradient slots of the
// wrapper). Bindings used by a single component stay with that component;
// bindings used across components (directly or through other bindings) are
// hoisted above the result tuple.
struct PlacedUnshare {
    struct Binding {
        std::string name;
        TermPtr body;
        std::set<long> body_refs;
    };
    std::map<long, Binding> bindings;
    std::map<long, std::set<int>> uses;  // component indices; kTopScope = hoisted
    std::vector<long> ctx;               // stack of binding ids being converted
    int cur_component = 0;

    void record_use(long id) {
        if (ctx.empty())
            uses[id].insert(cur_component);
        else
            bindings[ctx.back()].body_refs.insert(id);
    }

    TermPtr go(const TermPtr& t) {
        switch (t->tag) {
            case TermTag::Var:
            case TermTag::Const: return t;
            case TermTag::Share: {
                record_use(t->share_id);
                auto it = bindings.find(t->share_id);
                if (it != bindings.end()) return t_var(it->second.name);
                std::string name = share_var_name(t->share_id);
                bindings[t->share_id].name = name;
                ctx.push_back(t->share_id);
                TermPtr body = go(t->a);
                ctx.pop_back();
                bindings[t->share_id].body = body;
                return t_var(name);
            }
            case TermTag::PrimOp: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(go(k));
                return t_op(t->op, std::move(kids));
            }
            case TermTag::OneHot: return t_one_hot(t->shape_arg, t->ix, go(t->a));
            case TermTag::Replicate: return t_replicate(t->nat, go(t->a));
            case TermTag::Scatter: return t_scatter(t->shape_arg, go(t->a), t->fn);
            case TermTag::Gather: return t_gather(t->shape_arg, go(t->a), t->fn);
            case TermTag::Index: return t_index(go(t->a), t->ix);
            case TermTag::SumOuter: return t_sum_outer(go(t->a));
            case TermTag::Transpose: return t_transpose(t->perm, go(t->a));
            case TermTag::Reshape: return t_reshape(t->shape_arg, go(t->a));
            case TermTag::Cond: return t_cond(go(t->a), go(t->b), go(t->c));
            case TermTag::Ravel: {
                std::vector<TermPtr> kids;
                for (auto& k : t->kids) kids.push_back(go(k));
                return t_ravel(std::move(kids));
            }
            default:
                throw CheckError("ShapeMismatch", "unexpected node in gradient term");
        }
    }

    // component index (or kTopScope) per binding id
    std::map<long, int> place() {
        std::map<long, int> placement;
        for (auto it = bindings.rbegin(); it != bindings.rend(); ++it) {
            long id = it->first;
            const std::set<int>& u = uses[id];
            int where;
            if (u.empty()) {
                where = kTopScope;  // unreachable binding; keep it scoped safely
            } else if (u.size() == 1) {
                where = *u.begin();
            } else {
                where = kTopScope;
            }
            placement[id] = where;
            for (long ref : it->second.body_refs) uses[ref].insert(where);
        }
        return placement;
    }
};

}  // namespace

GradientProgram build_gradient_program(const Program& p, const BotOptions& bot_opts) {
    // fresh ids must not collide with any name already in the program
    long start = 1;
    {
        std::string text = print_program(p);
        // scan integer suffixes of identifiers
        for (size_t i = 0; i < text.size(); ++i) {
            if (isdigit((unsigned char)text[i]) && i > 0 && isalpha((unsigned char)text[i - 1])) {
                long v = 0;
                size_t j = i;
                while (j < text.size() && isdigit((unsigned char)text[j]))
                    v = v * 10 + (text[j++] - '0');
                start = std::max(start, v + 1);
                i = j;
            }
        }
    }
    IdGen ids(start);

    TypeEnv env = env_of_params(p.params);
    check(p.body, env);
    TermPtr bot = normalize(p.body, env, ids, bot_opts);
    check(bot, env);

    DualTerm dt = dualize(bot, p.params, ids);

    std::string cot = "c";
    for (auto& prm : p.params)
        if (prm.name == cot) cot = "c" + std::to_string(ids.fresh_id());

    std::map<int, TermPtr> grads = sym_reverse_pass(ids, t_var(cot), dt.dual);

    // reconstruct: one gradient slot per real param, zeros when absent
    GradientProgram out;
    out.cotangent_name = cot;
    std::vector<TermPtr> grad_terms;
    for (auto& [name, dvar] : dt.real_inputs) {
        out.grad_order.push_back(name);
        auto it = grads.find(dvar.id);
        if (it != grads.end())
            grad_terms.push_back(it->second);
        else
            grad_terms.push_back(t_const(ConcreteArray::zeros(Kind::Real, dvar.shape)));
    }

    // convert cotangent sharing to lets, placing each binding as low as its
    // uses allow
    PlacedUnshare pu;
    std::vector<TermPtr> converted;
    for (size_t i = 0; i < grad_terms.size(); ++i) {
        pu.cur_component = (int)i;
        converted.push_back(pu.go(grad_terms[i]));
    }
    std::map<long, int> placement = pu.place();

    for (size_t i = 0; i < converted.size(); ++i) {
        for (auto it = pu.bindings.rbegin(); it != pu.bindings.rend(); ++it) {
            if (placement[it->first] == (int)i)
                converted[i] = t_let(it->second.name, it->second.body, converted[i]);
        }
    }

    std::vector<TermPtr> parts;
    parts.push_back(dt.primal);
    for (auto& g : converted) parts.push_back(g);
    TermPtr body = t_tuple(std::move(parts));

    for (auto it = pu.bindings.rbegin(); it != pu.bindings.rend(); ++it)
        if (placement[it->first] == kTopScope)
            body = t_let(it->second.name, it->second.body, body);

    for (auto it = dt.primal_binds.rbegin(); it != dt.primal_binds.rend(); ++it)
        body = t_let(it->first, it->second, body);

    out.prog.params = p.params;
    out.prog.params.push_back(Param{cot, ArrayType{Kind::Real, Shape{}}});
    out.prog.body = body;
    check_program(out.prog);  // the emitted program must be scope- and shape-correct
    return out;
}

GradProgramEval eval_gradient_program(const GradientProgram& gp, const ValueEnv& inputs,
                                      const ConcreteArray& ctg) {
    ValueEnv env = inputs;
    env[gp.cotangent_name] = ctg;
    std::vector<ConcreteArray> vals = eval_multi(gp.prog.body, env);
    GradProgramEval out;
    out.value = vals.at(0);
    for (size_t i = 0; i < gp.grad_order.size(); ++i) out.grad[gp.grad_order[i]] = vals.at(i + 1);
    return out;
}

}  // namespace adl
