#include "adl/reverse.hpp"

#include <stdexcept>

namespace adl {

namespace {

struct Dual {
    ConcreteArray primal;
    ConcDelta delta;  // null for Int/Bool values
};

struct ConcDualize {
    IdGen& ids;
    ValueEnv prim_env;                  // primal values of everything in scope
    std::map<std::string, Dual> duals;  // dual bindings (real-kind have deltas)

    ConcDelta share(ConcDelta d) { return d_share<ConcreteCarrier>(ids.fresh_id(), std::move(d)); }

    ConcreteCarrier::Fn capture_fn(const IxFn& fn) {
        ConcreteCarrier::Fn out;
        out.m1 = (int)fn.binders.size();
        IxFn fncopy = fn;
        ValueEnv env = prim_env;
        out.apply = [fncopy, env](const IndexV& in) {
            ValueEnv inner = env;
            for (size_t i = 0; i < fncopy.binders.size(); ++i)
                inner[fncopy.binders[i]] = ConcreteArray::scalar_int(in[i]);
            IndexV ix;
            ix.reserve(fncopy.body.size());
            for (auto& c : fncopy.body) ix.push_back(eval(c, inner).scalar_i());
            return ix;
        };
        return out;
    }

    IndexV eval_ix(const IxExpr& ix) {
        IndexV out;
        out.reserve(ix.size());
        for (auto& c : ix) out.push_back(eval(c, prim_env).scalar_i());
        return out;
    }

    bool is_real(const TermPtr& t) {
        assert(t->type.has_value());
        return t->type->kind == Kind::Real;
    }

    Dual go(const TermPtr& t) {
        // Discrete-kind subterms are not differentiated; evaluate them as-is.
        if (!is_real(t)) return Dual{eval(t, prim_env), nullptr};

        switch (t->tag) {
            case TermTag::Const:
                return Dual{t->literal, d_zero<ConcreteCarrier>(t->literal.shape())};
            case TermTag::Var: {
                auto it = duals.find(t->name);
                assert(it != duals.end());
                return it->second;
            }
            case TermTag::Let: {
                Dual bound = go_any(t->a);
                auto saved_dual = duals.find(t->name) != duals.end()
                                      ? std::optional<Dual>(duals[t->name])
                                      : std::nullopt;
                auto saved_prim = prim_env.find(t->name) != prim_env.end()
                                      ? std::optional<ConcreteArray>(prim_env[t->name])
                                      : std::nullopt;
                duals[t->name] = bound;
                prim_env[t->name] = bound.primal;
                Dual r = go(t->b);
                if (saved_dual) duals[t->name] = *saved_dual; else duals.erase(t->name);
                if (saved_prim) prim_env[t->name] = *saved_prim; else prim_env.erase(t->name);
                return r;
            }
            case TermTag::Cond: {
                // Strict: all three evaluated; the selected dual is returned.
                ConcreteArray b = eval(t->a, prim_env);
                Dual u = go(t->b);
                Dual v = go(t->c);
                return b.scalar_b() ? u : v;
            }
            case TermTag::PrimOp: {
                if (op_is_unary(t->op)) {
                    Dual x = go(t->kids[0]);
                    ConcreteArray p = map_op(t->op, {x.primal});
                    ConcDelta d;
                    const Shape& sh = p.shape();
                    auto consts = [&](double v) {
                        return ConcreteArray::from_reals(
                            sh, std::vector<double>((size_t)sh.count(), v));
                    };
                    switch (t->op) {
                        case Op::Neg: d = d_scale<ConcreteCarrier>(consts(-1.0), x.delta); break;
                        case Op::Sin:
                            d = d_scale<ConcreteCarrier>(map_op(Op::Cos, {x.primal}), x.delta);
                            break;
                        case Op::Cos:
                            d = d_scale<ConcreteCarrier>(
                                map_op(Op::Neg, {map_op(Op::Sin, {x.primal})}), x.delta);
                            break;
                        case Op::Exp: d = d_scale<ConcreteCarrier>(p, x.delta); break;
                        case Op::Log:
                            d = d_scale<ConcreteCarrier>(map_op(Op::Div, {consts(1.0), x.primal}),
                                                         x.delta);
                            break;
                        case Op::Sqrt:
                            d = d_scale<ConcreteCarrier>(map_op(Op::Div, {consts(0.5), p}),
                                                         x.delta);
                            break;
                        case Op::Tanh:
                            d = d_scale<ConcreteCarrier>(
                                map_op(Op::Sub, {consts(1.0), map_op(Op::Mul, {p, p})}), x.delta);
                            break;
                        default: assert(false && "unary derivative");
                    }
                    return Dual{p, share(d)};
                }
                Dual x1 = go(t->kids[0]);
                Dual x2 = go(t->kids[1]);
                ConcreteArray p = map_op(t->op, {x1.primal, x2.primal});
                const Shape& sh = p.shape();
                auto consts = [&](double v) {
                    return ConcreteArray::from_reals(sh,
                                                     std::vector<double>((size_t)sh.count(), v));
                };
                ConcDelta d;
                switch (t->op) {
                    case Op::Add: d = d_add(x1.delta, x2.delta); break;
                    case Op::Sub:
                        d = d_add(x1.delta, d_scale<ConcreteCarrier>(consts(-1.0), x2.delta));
                        break;
                    case Op::Mul:
                        d = d_add(d_scale<ConcreteCarrier>(x2.primal, x1.delta),
                                  d_scale<ConcreteCarrier>(x1.primal, x2.delta));
                        break;
                    case Op::Div: {
                        // d(u/v) = du/v - (u/v^2) dv
                        ConcreteArray inv_v = map_op(Op::Div, {consts(1.0), x2.primal});
                        ConcreteArray coef2 = map_op(
                            Op::Neg,
                            {map_op(Op::Div, {x1.primal, map_op(Op::Mul, {x2.primal, x2.primal})})});
                        d = d_add(d_scale<ConcreteCarrier>(inv_v, x1.delta),
                                  d_scale<ConcreteCarrier>(coef2, x2.delta));
                        break;
                    }
                    default: assert(false && "binary derivative");
                }
                return Dual{p, share(d)};
            }
            case TermTag::Index: {
                Dual x = go(t->a);
                IndexV iv = eval_ix(t->ix);
                ConcreteArray p = index(x.primal, iv);
                return Dual{p, share(d_index<ConcreteCarrier>(x.delta, iv, (int)iv.size()))};
            }
            case TermTag::SumOuter: {
                Dual x = go(t->a);
                return Dual{sum_outer(x.primal), share(d_sum_outer(x.delta))};
            }
            case TermTag::Gather: {
                Dual x = go(t->a);
                ConcreteCarrier::Fn fn = capture_fn(t->fn);
                ConcreteArray p = gather(t->shape_arg, x.primal, fn.m1, fn.apply);
                return Dual{p, share(d_gather<ConcreteCarrier>(t->shape_arg, x.delta, fn))};
            }
            case TermTag::Scatter: {
                Dual x = go(t->a);
                ConcreteCarrier::Fn fn = capture_fn(t->fn);
                ConcreteArray p = scatter(t->shape_arg, x.primal, fn.m1, fn.apply);
                return Dual{p, share(d_scatter<ConcreteCarrier>(t->shape_arg, x.delta, fn))};
            }
            case TermTag::Ravel: {
                std::vector<ConcreteArray> prims;
                std::vector<ConcDelta> ds;
                for (auto& k : t->kids) {
                    Dual x = go(k);
                    prims.push_back(x.primal);
                    ds.push_back(x.delta);
                }
                return Dual{from_subarrays(prims), share(d_lit_array(std::move(ds)))};
            }
            case TermTag::Replicate: {
                Dual x = go(t->a);
                return Dual{replicate(t->nat, x.primal), share(d_replicate(t->nat, x.delta))};
            }
            case TermTag::Transpose: {
                Dual x = go(t->a);
                return Dual{transpose(t->perm, x.primal), share(d_transpose(t->perm, x.delta))};
            }
            case TermTag::Reshape: {
                Dual x = go(t->a);
                return Dual{reshape(t->shape_arg, x.primal),
                            share(d_reshape(t->shape_arg, x.delta))};
            }
            case TermTag::Build1:
                throw CheckError("ContainsBuild1", "run the bulk-operation transform first");
            default:
                throw CheckError("ShapeMismatch", "node not supported by forward dualization");
        }
    }

    Dual go_any(const TermPtr& t) {
        if (is_real(t)) return go(t);
        return Dual{eval(t, prim_env), nullptr};
    }
};

}  // namespace

ConcForward forward_concrete(const TermPtr& t, const std::vector<Param>& params,
                             const ValueEnv& inputs, IdGen& ids) {
    ConcForward out;
    ConcDualize cd{ids, {}, {}};
    int next_dvar = 1;
    for (auto& p : params) {
        auto it = inputs.find(p.name);
        if (it == inputs.end()) throw std::runtime_error("missing input for param " + p.name);
        cd.prim_env[p.name] = it->second;
        Dual d;
        d.primal = it->second;
        if (p.type.kind == Kind::Real) {
            DVarName v{next_dvar++, p.type.shape};
            d.delta = d_input<ConcreteCarrier>(v);
            out.real_inputs.emplace_back(p.name, v);
        }
        cd.duals[p.name] = d;
    }
    Dual r = cd.go(t);
    out.value = r.primal;
    out.delta = r.delta;
    return out;
}

GradResult grad_concrete(const TermPtr& t, const std::vector<Param>& params,
                         const ValueEnv& inputs, const ConcreteArray& ctg) {
    assert(t->type.has_value() && t->type->kind == Kind::Real && t->type->shape.rank() == 0 &&
           "rank-0 real result required");
    IdGen ids;
    ConcForward fwd = forward_concrete(t, params, inputs, ids);
    ConcretePolicy pol;
    auto rr = reverse_pass(pol, ctg, fwd.delta);

    GradResult out;
    out.value = fwd.value;
    out.eval_visits = rr.eval_visits;
    out.dequeued = rr.dequeued;
    out.delta_nodes = delta_node_count(fwd.delta);
    // reconstruct: zero-fill real params that received no contribution
    for (auto& [name, dvar] : fwd.real_inputs) {
        auto it = rr.grad.find(dvar.id);
        if (it != rr.grad.end())
            out.grad[name] = it->second;
        else
            out.grad[name] = ConcreteArray::zeros(Kind::Real, dvar.shape);
    }
    return out;
}

}  // namespace adl
