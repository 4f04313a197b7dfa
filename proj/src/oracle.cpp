#include "adl/oracle.hpp"

#include <cassert>
#include <algorithm>
#include <cmath>
#include <random>

#include "adl/check.hpp"

namespace adl {

std::map<std::string, ConcreteArray> finite_diff_grad(const TermPtr& t,
                                                      const std::vector<Param>& params,
                                                      const ValueEnv& inputs, double h) {
    std::map<std::string, ConcreteArray> out;
    for (auto& p : params) {
        if (p.type.kind != Kind::Real) continue;
        const ConcreteArray& x = inputs.at(p.name);
        ConcreteArray g = ConcreteArray::zeros(Kind::Real, x.shape());
        for (int64_t i = 0; i < x.count(); ++i) {
            double xi = x.real_at(i);
            double hi = h * std::max(1.0, std::fabs(xi));
            ValueEnv env = inputs;
            ConcreteArray xp = x;
            xp.reals()[(size_t)i] = xi + hi;
            env[p.name] = xp;
            double fp = eval(t, env).scalar_r();
            ConcreteArray xm = x;
            xm.reals()[(size_t)i] = xi - hi;
            env[p.name] = xm;
            double fm = eval(t, env).scalar_r();
            g.reals()[(size_t)i] = (fp - fm) / (2.0 * hi);
        }
        out[p.name] = g;
    }
    return out;
}

// --- random programs ----------------------------------------------------------

namespace {

struct Gen {
    std::mt19937_64 rng;
    const GenOptions& opts;
    std::vector<Param> params;
    int next_param = 0;
    int fresh = 0;

    // index variables in scope with their (exclusive) ranges
    std::vector<std::pair<std::string, int64_t>> ix_vars;
    // let-bound arrays in scope
    std::vector<std::pair<std::string, ArrayType>> lets;

    int64_t pick(int64_t lo, int64_t hi) {  // inclusive
        return lo + (int64_t)(rng() % (uint64_t)(hi - lo + 1));
    }
    bool chance(int pct) { return (int)(rng() % 100) < pct; }

    Shape random_shape(int max_rank) {
        int r = (int)pick(0, max_rank);
        Shape sh;
        for (int i = 0; i < r; ++i) sh.dims.push_back(pick(1, opts.max_dim));
        return sh;
    }

    std::string fresh_name(const char* stem) { return std::string(stem) + std::to_string(++fresh); }

    // A rank-0 Int term guaranteed to evaluate inside [0, k).
    TermPtr in_range_index(int64_t k, int depth) {
        // candidate index variables with usable range
        std::vector<size_t> usable;
        for (size_t i = 0; i < ix_vars.size(); ++i)
            if (ix_vars[i].second <= k) usable.push_back(i);
        int c = (int)pick(0, 5);
        if ((c <= 1 || depth > 2) && !usable.empty()) {
            auto& [name, range] = ix_vars[usable[(size_t)pick(0, (int64_t)usable.size() - 1)]];
            if (range == k && chance(40))
                return t_op(Op::Sub, {t_int(k - 1), t_var(name)});  // k-1-i, stays in range
            return t_var(name);
        }
        if (c == 2 && !ix_vars.empty() && k >= 1) {
            // (i + c) mod k
            auto& [name, range] = ix_vars[(size_t)pick(0, (int64_t)ix_vars.size() - 1)];
            (void)range;
            TermPtr e = t_op(Op::Add, {t_var(name), t_int(pick(0, k - 1))});
            return t_op(Op::Mod, {e, t_int(k)});
        }
        if (c == 3 && !ix_vars.empty() && depth <= 2) {
            // discrete conditional between two in-range indices
            TermPtr sel = t_op(Op::Eq, {t_op(Op::Mod, {in_range_index(4, depth + 1), t_int(2)}),
                                        t_int(0)});
            return t_cond(sel, in_range_index(k, depth + 1), in_range_index(k, depth + 1));
        }
        return t_int(pick(0, k - 1));
    }

    IxExpr in_range_ix(const Shape& dims, int m) {
        IxExpr ix;
        for (int j = 0; j < m; ++j) ix.push_back(in_range_index(dims.dim(j), 0));
        return ix;
    }

    TermPtr param_ref(const ArrayType& ty) {
        // reuse an existing param of this type or declare a new one
        for (auto& p : params)
            if (p.type == ty && chance(50)) return t_var(p.name);
        std::string name = "p" + std::to_string(++next_param);
        params.push_back(Param{name, ty});
        return t_var(name);
    }

    TermPtr leaf(const ArrayType& ty) {
        if (ty.kind == Kind::Real) {
            for (auto& [n, lty] : lets)
                if (lty == ty && chance(60)) return t_var(n);
            if (chance(75)) return param_ref(ty);
            std::vector<double> d((size_t)ty.shape.count());
            for (auto& v : d) v = (double)pick(-300, 300) / 100.0;
            return t_const(ConcreteArray::from_reals(ty.shape, std::move(d)));
        }
        if (ty.kind == Kind::Int) {
            std::vector<int64_t> d((size_t)ty.shape.count());
            for (auto& v : d) v = pick(-3, 3);
            return t_const(ConcreteArray::from_ints(ty.shape, std::move(d)));
        }
        std::vector<uint8_t> d((size_t)ty.shape.count());
        for (auto& v : d) v = (uint8_t)pick(0, 1);
        return t_const(ConcreteArray::from_bools(ty.shape, std::move(d)));
    }

    // A real-kind term of the requested shape.
    TermPtr real(const Shape& sh, int budget) {
        ArrayType ty{Kind::Real, sh};
        if (budget <= 1) return leaf(ty);
        int r = sh.rank();
        for (int attempt = 0; attempt < 24; ++attempt) {
            switch (pick(0, 13)) {
                case 0: {  // elementwise binary
                    Op op = chance(50) ? Op::Add : (chance(55) ? Op::Mul : Op::Sub);
                    return t_op(op, {real(sh, budget / 2), real(sh, budget / 2)});
                }
                case 1: {  // elementwise unary, smooth everywhere
                    Op u;
                    switch (pick(0, 3)) {
                        case 0: u = Op::Sin; break;
                        case 1: u = Op::Cos; break;
                        case 2: u = Op::Tanh; break;
                        default: u = Op::Neg; break;
                    }
                    return t_op(u, {real(sh, budget - 1)});
                }
                case 2: {  // build1
                    if (r < 1 || r > opts.max_rank) break;
                    std::string iv = fresh_name("g");
                    ix_vars.emplace_back(iv, sh.dim(0));
                    TermPtr body = real(sh.drop(1), budget - 2);
                    ix_vars.pop_back();
                    return t_build1(sh.dim(0), iv, body);
                }
                case 3: {  // index a larger array
                    if (r >= opts.max_rank) break;
                    int extra = (int)pick(1, opts.max_rank - r);
                    Shape big = sh;
                    std::vector<int64_t> lead;
                    for (int j = 0; j < extra; ++j) lead.push_back(pick(1, opts.max_dim));
                    Shape big2;
                    big2.dims = lead;
                    big2.dims.insert(big2.dims.end(), sh.dims.begin(), sh.dims.end());
                    TermPtr a = real(big2, budget - 2);
                    return t_index(a, in_range_ix(big2, extra));
                }
                case 4: {  // sum the outer dimension
                    if (r + 1 > opts.max_rank) break;
                    Shape big = sh.cons(pick(1, opts.max_dim));
                    return t_sum_outer(real(big, budget - 1));
                }
                case 5: {  // gather
                    if (r < 1 || r > opts.max_rank) break;
                    int m1 = (int)pick(1, r);
                    int trailing = r - m1;
                    int m2 = (int)pick(1, opts.max_rank - trailing >= 1
                                              ? std::min(2, opts.max_rank - trailing)
                                              : 1);
                    Shape src;
                    for (int j = 0; j < m2; ++j) src.dims.push_back(pick(1, opts.max_dim));
                    for (int j = 0; j < trailing; ++j)
                        src.dims.push_back(sh.dim(m1 + j));
                    TermPtr a = real(src, budget - 2);
                    IxFn fn;
                    for (int j = 0; j < m1; ++j) {
                        fn.binders.push_back(fresh_name("g"));
                        ix_vars.emplace_back(fn.binders.back(), sh.dim(j));
                    }
                    fn.body = in_range_ix(src, m2);
                    for (int j = 0; j < m1; ++j) ix_vars.pop_back();
                    return t_gather(sh, a, fn);
                }
                case 6: {  // scatter
                    if (r < 1 || r > opts.max_rank) break;
                    int m2 = (int)pick(1, r);
                    int trailing = r - m2;
                    int m1 = (int)pick(1, std::max(1, opts.max_rank - trailing));
                    Shape src;
                    for (int j = 0; j < m1; ++j) src.dims.push_back(pick(1, opts.max_dim));
                    for (int j = 0; j < trailing; ++j)
                        src.dims.push_back(sh.dim(m2 + j));
                    TermPtr a = real(src, budget - 2);
                    IxFn fn;
                    for (int j = 0; j < m1; ++j) {
                        fn.binders.push_back(fresh_name("g"));
                        ix_vars.emplace_back(fn.binders.back(), src.dim(j));
                    }
                    fn.body = in_range_ix(sh, m2);
                    for (int j = 0; j < m1; ++j) ix_vars.pop_back();
                    return t_scatter(sh, a, fn);
                }
                case 7: {  // ravel
                    if (r < 1 || sh.dim(0) > 4) break;
                    std::vector<TermPtr> parts;
                    for (int64_t j = 0; j < sh.dim(0); ++j)
                        parts.push_back(real(sh.drop(1), budget / (int)sh.dim(0) + 1));
                    return t_ravel(std::move(parts));
                }
                case 8: {  // replicate
                    if (r < 1) break;
                    return t_replicate(sh.dim(0), real(sh.drop(1), budget - 1));
                }
                case 9: {  // transpose
                    if (r < 2) break;
                    std::vector<int> perm;
                    for (int j = 0; j < r; ++j) perm.push_back(j);
                    std::shuffle(perm.begin(), perm.end(), rng);
                    Shape src = sh;
                    // out dim l = src dim perm[l]  =>  src dim perm[l] = sh dim l
                    for (int l = 0; l < r; ++l) src.dims[(size_t)perm[(size_t)l]] = sh.dim(l);
                    return t_transpose(perm, real(src, budget - 1));
                }
                case 10: {  // reshape
                    Shape src = random_shape(opts.max_rank);
                    if (src.count() != sh.count()) {
                        // factor the element count differently: fall back to flat
                        src = Shape{sh.count()};
                    }
                    return t_reshape(sh, real(src, budget - 1));
                }
                case 11: {  // strict conditional on a discrete scrutinee
                    TermPtr sel =
                        t_op(Op::Eq, {t_op(Op::Mod, {in_range_index(5, 0), t_int(2)}), t_int(0)});
                    return t_cond(sel, real(sh, budget / 2), real(sh, budget / 2));
                }
                case 12: {  // let binding
                    Shape bsh = random_shape(opts.max_rank);
                    std::string x = fresh_name("w");
                    TermPtr bound = real(bsh, budget / 2);
                    lets.emplace_back(x, ArrayType{Kind::Real, bsh});
                    TermPtr body = real(sh, budget / 2);
                    lets.pop_back();
                    return t_let(x, bound, body);
                }
                case 13: {  // scaled by a discrete-derived factor
                    TermPtr iv = in_range_index(3, 0);
                    if (sh.rank() != 0) break;
                    // cond-selected constants keep it piecewise constant
                    TermPtr factor = t_cond(t_op(Op::Le, {iv, t_int(1)}), t_real(0.5), t_real(2.0));
                    return t_op(Op::Mul, {factor, real(sh, budget - 2)});
                }
            }
        }
        return leaf(ty);
    }
};

}  // namespace

Program gen_program(uint64_t seed, const GenOptions& opts) {
    for (uint64_t attempt = 0;; ++attempt) {
        Gen g{std::mt19937_64(seed * 0x9e3779b97f4a7c15ULL + attempt * 0x100000001b3ULL + 1), opts, {}, 0, 0, {}, {}};
        Program p;
        // rank-0 real result, typically via an outer reduction
        TermPtr body;
        if (g.chance(70)) {
            Shape v{g.pick(1, opts.max_dim)};
            body = t_sum_outer(g.real(v, opts.size_budget));
        } else {
            body = g.real(Shape{}, opts.size_budget);
        }
        p.params = g.params;
        if (p.params.empty()) {
            // ensure there is something to differentiate with respect to
            p.params.push_back(Param{"p1", ArrayType{Kind::Real, Shape{3}}});
            body = t_op(Op::Add, {body, t_sum_outer(t_var("p1"))});
        }
        p.body = body;
        try {
            ArrayType ty = check(p.body, env_of_params(p.params));
            if (ty.kind != Kind::Real || ty.shape.rank() != 0) continue;
        } catch (const CheckError&) {
            continue;
        }
        // keep values in a range where relative tolerances are meaningful
        ValueEnv probe = gen_input(seed ^ 0xabcdef, p.params);
        double v = eval(p.body, probe).scalar_r();
        if (!std::isfinite(v) || std::fabs(v) > opts.max_magnitude) continue;
        return p;
    }
}

ValueEnv gen_input(uint64_t seed, const std::vector<Param>& params) {
    std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 99);
    std::uniform_real_distribution<double> ur(-2.0, 2.0);
    ValueEnv env;
    for (auto& p : params) {
        int64_t n = p.type.shape.count();
        switch (p.type.kind) {
            case Kind::Real: {
                std::vector<double> d((size_t)n);
                for (auto& v : d) v = ur(rng);
                env[p.name] = ConcreteArray::from_reals(p.type.shape, std::move(d));
                break;
            }
            case Kind::Int: {
                std::vector<int64_t> d((size_t)n);
                for (auto& v : d) v = (int64_t)(rng() % 7) - 3;
                env[p.name] = ConcreteArray::from_ints(p.type.shape, std::move(d));
                break;
            }
            case Kind::Bool: {
                std::vector<uint8_t> d((size_t)n);
                for (auto& v : d) v = (uint8_t)(rng() % 2);
                env[p.name] = ConcreteArray::from_bools(p.type.shape, std::move(d));
                break;
            }
        }
    }
    return env;
}

namespace {

void census_walk(const TermPtr& t, std::map<std::string, int>& m) {
    const char* k = nullptr;
    switch (t->tag) {
        case TermTag::Const: k = "const"; break;
        case TermTag::Var: k = "var"; break;
        case TermTag::Let: k = "let"; break;
        case TermTag::Cond: k = "cond"; break;
        case TermTag::PrimOp:
            k = op_is_comparison(t->op) ? "op-cmp" : (op_is_unary(t->op) ? "op-unary" : "op-binary");
            break;
        case TermTag::Index: k = "index"; break;
        case TermTag::SumOuter: k = "sumouter"; break;
        case TermTag::Gather: k = "gather"; break;
        case TermTag::Scatter: k = "scatter"; break;
        case TermTag::Ravel: k = "ravel"; break;
        case TermTag::Replicate: k = "replicate"; break;
        case TermTag::Transpose: k = "tr"; break;
        case TermTag::Reshape: k = "reshape"; break;
        case TermTag::Build1: k = "build1"; break;
        case TermTag::Share: k = "share"; break;
        case TermTag::OneHot: k = "onehot"; break;
        case TermTag::Tuple: k = "tuple"; break;
    }
    m[k] += 1;
    if (t->a) census_walk(t->a, m);
    if (t->b) census_walk(t->b, m);
    if (t->c) census_walk(t->c, m);
    for (auto& kd : t->kids) census_walk(kd, m);
    for (auto& c : t->ix) census_walk(c, m);
    for (auto& c : t->fn.body) census_walk(c, m);
}

}  // namespace

std::map<std::string, int> production_census(const TermPtr& t) {
    std::map<std::string, int> m;
    census_walk(t, m);
    return m;
}

}  // namespace adl
