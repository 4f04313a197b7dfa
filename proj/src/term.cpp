#include "adl/term.hpp"

#include <cassert>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace adl {

namespace {
std::shared_ptr<Term> mk(TermTag t) { return std::make_shared<Term>(t); }
}  // namespace

TermPtr t_const(ConcreteArray v) {
    auto t = mk(TermTag::Const);
    t->literal = std::move(v);
    return t;
}

TermPtr t_real(double v) { return t_const(ConcreteArray::scalar_real(v)); }
TermPtr t_int(int64_t v) { return t_const(ConcreteArray::scalar_int(v)); }

TermPtr t_var(std::string name) {
    auto t = mk(TermTag::Var);
    t->name = std::move(name);
    return t;
}

TermPtr t_let(std::string name, TermPtr bound, TermPtr body) {
    auto t = mk(TermTag::Let);
    t->name = std::move(name);
    t->a = std::move(bound);
    t->b = std::move(body);
    return t;
}

TermPtr t_cond(TermPtr b, TermPtr u, TermPtr v) {
    auto t = mk(TermTag::Cond);
    t->a = std::move(b);
    t->b = std::move(u);
    t->c = std::move(v);
    return t;
}

TermPtr t_op(Op op, std::vector<TermPtr> args) {
    auto t = mk(TermTag::PrimOp);
    t->op = op;
    t->kids = std::move(args);
    return t;
}

TermPtr t_index(TermPtr a, IxExpr ix) {
    auto t = mk(TermTag::Index);
    t->a = std::move(a);
    t->ix = std::move(ix);
    return t;
}

TermPtr t_sum_outer(TermPtr a) {
    auto t = mk(TermTag::SumOuter);
    t->a = std::move(a);
    return t;
}

TermPtr t_gather(Shape sh, TermPtr a, IxFn fn) {
    auto t = mk(TermTag::Gather);
    t->shape_arg = std::move(sh);
    t->a = std::move(a);
    t->fn = std::move(fn);
    return t;
}

TermPtr t_scatter(Shape sh, TermPtr a, IxFn fn) {
    auto t = mk(TermTag::Scatter);
    t->shape_arg = std::move(sh);
    t->a = std::move(a);
    t->fn = std::move(fn);
    return t;
}

TermPtr t_ravel(std::vector<TermPtr> parts) {
    auto t = mk(TermTag::Ravel);
    t->kids = std::move(parts);
    return t;
}

TermPtr t_replicate(int64_t k, TermPtr a) {
    auto t = mk(TermTag::Replicate);
    t->nat = k;
    t->a = std::move(a);
    return t;
}

TermPtr t_transpose(std::vector<int> perm, TermPtr a) {
    auto t = mk(TermTag::Transpose);
    t->perm = std::move(perm);
    t->a = std::move(a);
    return t;
}

TermPtr t_reshape(Shape sh, TermPtr a) {
    auto t = mk(TermTag::Reshape);
    t->shape_arg = std::move(sh);
    t->a = std::move(a);
    return t;
}

TermPtr t_build1(int64_t k, std::string ixvar, TermPtr body) {
    auto t = mk(TermTag::Build1);
    t->nat = k;
    t->name = std::move(ixvar);
    t->a = std::move(body);
    return t;
}

TermPtr t_share(long id, TermPtr a) {
    auto t = mk(TermTag::Share);
    t->share_id = id;
    t->a = std::move(a);
    return t;
}

TermPtr t_one_hot(Shape sh, IxExpr ix, TermPtr v) {
    auto t = mk(TermTag::OneHot);
    t->shape_arg = std::move(sh);
    t->ix = std::move(ix);
    t->a = std::move(v);
    return t;
}

TermPtr t_tuple(std::vector<TermPtr> parts) {
    auto t = mk(TermTag::Tuple);
    t->kids = std::move(parts);
    return t;
}

// --- free variables ---------------------------------------------------------

namespace {

void fv_walk(const TermPtr& t, std::set<std::string>& bound, std::set<std::string>& out);

void fv_ix(const IxExpr& ix, std::set<std::string>& bound, std::set<std::string>& out) {
    for (auto& c : ix) fv_walk(c, bound, out);
}

void fv_fn(const IxFn& fn, std::set<std::string>& bound, std::set<std::string>& out) {
    std::vector<std::string> added;
    for (auto& b : fn.binders)
        if (bound.insert(b).second) added.push_back(b);
    fv_ix(fn.body, bound, out);
    for (auto& b : added) bound.erase(b);
}

void fv_walk(const TermPtr& t, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (t->tag) {
        case TermTag::Const: return;
        case TermTag::Var:
            if (!bound.count(t->name)) out.insert(t->name);
            return;
        case TermTag::Let: {
            fv_walk(t->a, bound, out);
            bool fresh = bound.insert(t->name).second;
            fv_walk(t->b, bound, out);
            if (fresh) bound.erase(t->name);
            return;
        }
        case TermTag::Cond:
            fv_walk(t->a, bound, out);
            fv_walk(t->b, bound, out);
            fv_walk(t->c, bound, out);
            return;
        case TermTag::PrimOp:
        case TermTag::Ravel:
        case TermTag::Tuple:
            for (auto& k : t->kids) fv_walk(k, bound, out);
            return;
        case TermTag::Index:
            fv_walk(t->a, bound, out);
            fv_ix(t->ix, bound, out);
            return;
        case TermTag::SumOuter:
        case TermTag::Replicate:
        case TermTag::Transpose:
        case TermTag::Reshape:
        case TermTag::Share:
            fv_walk(t->a, bound, out);
            return;
        case TermTag::Gather:
        case TermTag::Scatter:
            fv_walk(t->a, bound, out);
            fv_fn(t->fn, bound, out);
            return;
        case TermTag::OneHot:
            fv_walk(t->a, bound, out);
            fv_ix(t->ix, bound, out);
            return;
        case TermTag::Build1: {
            bool fresh = bound.insert(t->name).second;
            fv_walk(t->a, bound, out);
            if (fresh) bound.erase(t->name);
            return;
        }
    }
}

}  // namespace

std::set<std::string> free_vars(const TermPtr& t) {
    std::set<std::string> bound, out;
    fv_walk(t, bound, out);
    return out;
}

// --- substitution -----------------------------------------------------------

namespace {

struct Subst {
    const std::string& name;
    const TermPtr& repl;
    std::set<std::string> repl_fv;
    long rename_counter = 0;

    std::string freshen(const std::string& stem) {
        return stem + "$" + std::to_string(++rename_counter);
    }

    TermPtr term(const TermPtr& t) {
        switch (t->tag) {
            case TermTag::Const: return t;
            case TermTag::Var: return t->name == name ? repl : t;
            case TermTag::Let: {
                TermPtr bound = term(t->a);
                if (t->name == name) {
                    // binder shadows; body untouched
                    if (bound == t->a) return t;
                    return t_let(t->name, bound, t->b);
                }
                if (repl_fv.count(t->name)) {
                    // rename binder to avoid capture
                    std::string b2 = freshen(t->name);
                    TermPtr body = subst(t->b, t->name, t_var(b2));
                    return t_let(b2, bound, term(body));
                }
                return t_let(t->name, bound, term(t->b));
            }
            case TermTag::Cond: return t_cond(term(t->a), term(t->b), term(t->c));
            case TermTag::PrimOp: return t_op(t->op, kids(t->kids));
            case TermTag::Index: return t_index(term(t->a), ixe(t->ix));
            case TermTag::SumOuter: return t_sum_outer(term(t->a));
            case TermTag::Gather: return t_gather(t->shape_arg, term(t->a), fn(t->fn));
            case TermTag::Scatter: return t_scatter(t->shape_arg, term(t->a), fn(t->fn));
            case TermTag::Ravel: return t_ravel(kids(t->kids));
            case TermTag::Replicate: return t_replicate(t->nat, term(t->a));
            case TermTag::Transpose: return t_transpose(t->perm, term(t->a));
            case TermTag::Reshape: return t_reshape(t->shape_arg, term(t->a));
            case TermTag::Share: return t_share(t->share_id, term(t->a));
            case TermTag::OneHot: return t_one_hot(t->shape_arg, ixe(t->ix), term(t->a));
            case TermTag::Tuple: return t_tuple(kids(t->kids));
            case TermTag::Build1: {
                if (t->name == name) return t;
                if (repl_fv.count(t->name)) {
                    std::string b2 = freshen(t->name);
                    TermPtr body = subst(t->a, t->name, t_var(b2));
                    return t_build1(t->nat, b2, term(body));
                }
                return t_build1(t->nat, t->name, term(t->a));
            }
        }
        return t;
    }

    std::vector<TermPtr> kids(const std::vector<TermPtr>& ks) {
        std::vector<TermPtr> out;
        out.reserve(ks.size());
        for (auto& k : ks) out.push_back(term(k));
        return out;
    }

    IxExpr ixe(const IxExpr& ix) {
        IxExpr out;
        out.reserve(ix.size());
        for (auto& c : ix) out.push_back(term(c));
        return out;
    }

    IxFn fn(const IxFn& f) {
        for (auto& b : f.binders) {
            if (b == name) return f;  // shadowed
        }
        IxFn out = f;
        for (auto& b : f.binders) {
            if (repl_fv.count(b)) {
                // rename fn binder away from the replacement's free vars
                std::string b2 = freshen(b);
                IxExpr body2;
                for (auto& c : out.body) body2.push_back(subst(c, b, t_var(b2)));
                out.body = std::move(body2);
                for (auto& bb : out.binders)
                    if (bb == b) bb = b2;
            }
        }
        out.body = ixe(out.body);
        return out;
    }
};

}  // namespace

TermPtr subst(const TermPtr& t, const std::string& name, const TermPtr& replacement) {
    Subst s{name, replacement, free_vars(replacement)};
    return s.term(t);
}

// --- alpha equivalence ------------------------------------------------------

namespace {

struct AlphaCtx {
    // bound-variable correspondence (s-name -> t-name), scoped
    std::vector<std::pair<std::string, std::string>> binders;
    const std::map<std::string, std::string>* free_corr;
    std::map<long, long> share_corr;

    bool var_match(const std::string& sn, const std::string& tn) {
        for (auto it = binders.rbegin(); it != binders.rend(); ++it) {
            if (it->first == sn || it->second == tn) return it->first == sn && it->second == tn;
        }
        auto fc = free_corr->find(sn);
        if (fc != free_corr->end()) return fc->second == tn;
        return sn == tn;
    }

    bool share_match(long si, long ti) {
        auto it = share_corr.find(si);
        if (it != share_corr.end()) return it->second == ti;
        for (auto& [k, v] : share_corr)
            if (v == ti) return false;
        share_corr[si] = ti;
        return true;
    }
};

bool aeq(const TermPtr& s, const TermPtr& t, AlphaCtx& ctx);

bool aeq_ix(const IxExpr& a, const IxExpr& b, AlphaCtx& ctx) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!aeq(a[i], b[i], ctx)) return false;
    return true;
}

bool aeq_fn(const IxFn& a, const IxFn& b, AlphaCtx& ctx) {
    if (a.binders.size() != b.binders.size()) return false;
    for (size_t i = 0; i < a.binders.size(); ++i)
        ctx.binders.emplace_back(a.binders[i], b.binders[i]);
    bool ok = aeq_ix(a.body, b.body, ctx);
    ctx.binders.resize(ctx.binders.size() - a.binders.size());
    return ok;
}

bool aeq(const TermPtr& s, const TermPtr& t, AlphaCtx& ctx) {
    if (s->tag != t->tag) return false;
    switch (s->tag) {
        case TermTag::Const: return s->literal == t->literal;
        case TermTag::Var: return ctx.var_match(s->name, t->name);
        case TermTag::Let: {
            if (!aeq(s->a, t->a, ctx)) return false;
            ctx.binders.emplace_back(s->name, t->name);
            bool ok = aeq(s->b, t->b, ctx);
            ctx.binders.pop_back();
            return ok;
        }
        case TermTag::Cond:
            return aeq(s->a, t->a, ctx) && aeq(s->b, t->b, ctx) && aeq(s->c, t->c, ctx);
        case TermTag::PrimOp:
            if (s->op != t->op || s->kids.size() != t->kids.size()) return false;
            for (size_t i = 0; i < s->kids.size(); ++i)
                if (!aeq(s->kids[i], t->kids[i], ctx)) return false;
            return true;
        case TermTag::Index: return aeq(s->a, t->a, ctx) && aeq_ix(s->ix, t->ix, ctx);
        case TermTag::SumOuter: return aeq(s->a, t->a, ctx);
        case TermTag::Gather:
        case TermTag::Scatter:
            return s->shape_arg == t->shape_arg && aeq(s->a, t->a, ctx) && aeq_fn(s->fn, t->fn, ctx);
        case TermTag::Ravel:
        case TermTag::Tuple:
            if (s->kids.size() != t->kids.size()) return false;
            for (size_t i = 0; i < s->kids.size(); ++i)
                if (!aeq(s->kids[i], t->kids[i], ctx)) return false;
            return true;
        case TermTag::Replicate: return s->nat == t->nat && aeq(s->a, t->a, ctx);
        case TermTag::Transpose: return s->perm == t->perm && aeq(s->a, t->a, ctx);
        case TermTag::Reshape: return s->shape_arg == t->shape_arg && aeq(s->a, t->a, ctx);
        case TermTag::Share:
            return ctx.share_match(s->share_id, t->share_id) && aeq(s->a, t->a, ctx);
        case TermTag::OneHot:
            return s->shape_arg == t->shape_arg && aeq_ix(s->ix, t->ix, ctx) && aeq(s->a, t->a, ctx);
        case TermTag::Build1: {
            if (s->nat != t->nat) return false;
            ctx.binders.emplace_back(s->name, t->name);
            bool ok = aeq(s->a, t->a, ctx);
            ctx.binders.pop_back();
            return ok;
        }
    }
    return false;
}

}  // namespace

bool alpha_eq(const TermPtr& s, const TermPtr& t,
              const std::map<std::string, std::string>& free_corr) {
    AlphaCtx ctx;
    ctx.free_corr = &free_corr;
    return aeq(s, t, ctx);
}

// --- printing ---------------------------------------------------------------

namespace {

void print_bracketed(std::ostringstream& os, const std::vector<int64_t>& v) {
    os << "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    os << "]";
}

void pr(std::ostringstream& os, const TermPtr& t);

void pr_ix(std::ostringstream& os, const IxExpr& ix) {
    os << "[";
    for (size_t i = 0; i < ix.size(); ++i) {
        if (i) os << " ";
        pr(os, ix[i]);
    }
    os << "]";
}

void pr_fn(std::ostringstream& os, const IxFn& fn) {
    os << "(lam [";
    for (size_t i = 0; i < fn.binders.size(); ++i) {
        if (i) os << " ";
        os << fn.binders[i];
    }
    os << "] ";
    pr_ix(os, fn.body);
    os << ")";
}

void pr(std::ostringstream& os, const TermPtr& t) {
    switch (t->tag) {
        case TermTag::Const: {
            const ConcreteArray& a = t->literal;
            if (a.rank() == 0) {
                // scalar shorthand; reals keep a decimal point so the kind
                // survives re-parsing
                switch (a.kind()) {
                    case Kind::Int: os << a.scalar_i(); return;
                    case Kind::Bool: os << (a.scalar_b() ? "true" : "false"); return;
                    case Kind::Real: {
                        char buf[40];
                        snprintf(buf, sizeof buf, "%.17g", a.scalar_r());
                        std::string s = buf;
                        if (s.find_first_of(".eE") == std::string::npos &&
                            s.find_first_of("0123456789") != std::string::npos &&
                            s != "inf" && s != "-inf" && s != "nan")
                            s += ".0";
                        os << s;
                        return;
                    }
                }
            }
            os << "(array " << kind_name(a.kind()) << " ";
            print_bracketed(os, a.shape().dims);
            os << " [";
            for (int64_t i = 0; i < a.count(); ++i) {
                if (i) os << ",";
                switch (a.kind()) {
                    case Kind::Real: {
                        char buf[40];
                        snprintf(buf, sizeof buf, "%.17g", a.real_at(i));
                        os << buf;
                        break;
                    }
                    case Kind::Int: os << a.int_at(i); break;
                    case Kind::Bool: os << (a.bool_at(i) ? 1 : 0); break;
                }
            }
            os << "])";
            return;
        }
        case TermTag::Var: os << t->name; return;
        case TermTag::Let:
            os << "(let (" << t->name << " ";
            pr(os, t->a);
            os << ") ";
            pr(os, t->b);
            os << ")";
            return;
        case TermTag::Cond:
            os << "(cond ";
            pr(os, t->a);
            os << " ";
            pr(os, t->b);
            os << " ";
            pr(os, t->c);
            os << ")";
            return;
        case TermTag::PrimOp:
            os << "(op " << op_name(t->op);
            for (auto& k : t->kids) {
                os << " ";
                pr(os, k);
            }
            os << ")";
            return;
        case TermTag::Index:
            os << "(index ";
            pr(os, t->a);
            os << " ";
            pr_ix(os, t->ix);
            os << ")";
            return;
        case TermTag::SumOuter:
            os << "(sumouter ";
            pr(os, t->a);
            os << ")";
            return;
        case TermTag::Gather:
        case TermTag::Scatter:
            os << (t->tag == TermTag::Gather ? "(gather " : "(scatter ");
            print_bracketed(os, t->shape_arg.dims);
            os << " ";
            pr(os, t->a);
            os << " ";
            pr_fn(os, t->fn);
            os << ")";
            return;
        case TermTag::Ravel:
            os << "(ravel";
            for (auto& k : t->kids) {
                os << " ";
                pr(os, k);
            }
            os << ")";
            return;
        case TermTag::Replicate:
            os << "(replicate " << t->nat << " ";
            pr(os, t->a);
            os << ")";
            return;
        case TermTag::Transpose: {
            os << "(tr [";
            for (size_t i = 0; i < t->perm.size(); ++i) {
                if (i) os << ",";
                os << t->perm[i];
            }
            os << "] ";
            pr(os, t->a);
            os << ")";
            return;
        }
        case TermTag::Reshape:
            os << "(reshape ";
            print_bracketed(os, t->shape_arg.dims);
            os << " ";
            pr(os, t->a);
            os << ")";
            return;
        case TermTag::Build1:
            os << "(build1 " << t->nat << " (lam " << t->name << " ";
            pr(os, t->a);
            os << "))";
            return;
        case TermTag::Share:
            os << "(share " << t->share_id << " ";
            pr(os, t->a);
            os << ")";
            return;
        case TermTag::OneHot:
            os << "(onehot ";
            print_bracketed(os, t->shape_arg.dims);
            os << " ";
            pr_ix(os, t->ix);
            os << " ";
            pr(os, t->a);
            os << ")";
            return;
        case TermTag::Tuple:
            os << "(tuple";
            for (auto& k : t->kids) {
                os << " ";
                pr(os, k);
            }
            os << ")";
            return;
    }
}

}  // namespace

std::string print_term(const TermPtr& t) {
    std::ostringstream os;
    pr(os, t);
    return os.str();
}

std::string print_program(const Program& p) {
    std::ostringstream os;
    os << "(params";
    for (auto& pr_ : p.params) {
        os << " (" << pr_.name << " " << kind_name(pr_.type.kind) << " ";
        print_bracketed(os, pr_.type.shape.dims);
        os << ")";
    }
    os << ")\n";
    pr(os, p.body);
    os << "\n";
    return os.str();
}

namespace {

void size_walk(const TermPtr& t, std::unordered_set<const Term*>& seen, int64_t& n) {
    if (t->tag == TermTag::Share && !seen.insert(t.get()).second) return;
    ++n;
    auto walk_ix = [&](const IxExpr& ix) {
        for (auto& c : ix) size_walk(c, seen, n);
    };
    if (t->a) size_walk(t->a, seen, n);
    if (t->b) size_walk(t->b, seen, n);
    if (t->c) size_walk(t->c, seen, n);
    for (auto& k : t->kids) size_walk(k, seen, n);
    walk_ix(t->ix);
    walk_ix(t->fn.body);
}

}  // namespace

int64_t term_size(const TermPtr& t) {
    std::unordered_set<const Term*> seen;
    int64_t n = 0;
    size_walk(t, seen, n);
    return n;
}

namespace {

bool tag_anywhere(const TermPtr& t, TermTag tag) {
    if (t->tag == tag) return true;
    if (t->a && tag_anywhere(t->a, tag)) return true;
    if (t->b && tag_anywhere(t->b, tag)) return true;
    if (t->c && tag_anywhere(t->c, tag)) return true;
    for (auto& k : t->kids)
        if (tag_anywhere(k, tag)) return true;
    for (auto& c : t->ix)
        if (tag_anywhere(c, tag)) return true;
    for (auto& c : t->fn.body)
        if (tag_anywhere(c, tag)) return true;
    return false;
}

struct ShareScan {
    std::vector<std::string> out;
    std::map<long, const Term*> share_nodes;

    void payload(const TermPtr& t) {
        if (t->tag == TermTag::Share) out.push_back("Share inside an index payload");
        if (t->a) payload(t->a);
        if (t->b) payload(t->b);
        if (t->c) payload(t->c);
        for (auto& k : t->kids) payload(k);
        for (auto& c : t->ix) payload(c);
        for (auto& c : t->fn.body) payload(c);
    }

    void walk(const TermPtr& t, bool under_let, long share_bound) {
        if (t->tag == TermTag::Let) {
            if (share_bound >= 0) out.push_back("Let under Share " + std::to_string(share_bound));
            walk(t->a, true, share_bound);
            walk(t->b, true, share_bound);
            return;
        }
        if (t->tag == TermTag::Share) {
            if (under_let) out.push_back("Share " + std::to_string(t->share_id) + " under Let");
            if (share_bound >= 0 && t->share_id >= share_bound)
                out.push_back("Share id " + std::to_string(t->share_id) +
                              " not below enclosing id " + std::to_string(share_bound));
            auto it = share_nodes.find(t->share_id);
            if (it != share_nodes.end()) {
                if (it->second != t.get())
                    out.push_back("Share id " + std::to_string(t->share_id) +
                                  " wraps two distinct nodes");
                return;  // body already scanned
            }
            share_nodes.emplace(t->share_id, t.get());
            walk(t->a, under_let, t->share_id);
            return;
        }
        if (t->a) walk(t->a, under_let, share_bound);
        if (t->b) walk(t->b, under_let, share_bound);
        if (t->c) walk(t->c, under_let, share_bound);
        for (auto& k : t->kids) walk(k, under_let, share_bound);
        for (auto& c : t->ix) payload(c);
        for (auto& c : t->fn.body) payload(c);
    }
};

}  // namespace

bool contains_share(const TermPtr& t) { return tag_anywhere(t, TermTag::Share); }
bool contains_build1(const TermPtr& t) { return tag_anywhere(t, TermTag::Build1); }

std::vector<std::string> scan_share_discipline(const TermPtr& t) {
    ShareScan s;
    s.walk(t, false, -1);
    return s.out;
}

}  // namespace adl
