// Acceptance suite: runs every pipeline-level criterion at its stated
// tolerance and prints one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "adl/bot.hpp"
#include "adl/interp.hpp"
#include "adl/oracle.hpp"
#include "adl/parser.hpp"
#include "adl/reverse.hpp"
#include "adl/symbolic.hpp"
#include "suite.hpp"

using namespace adl;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int crit, const char* what, bool ok, double ms, double limit_ms) {
    bool in_time = ms <= limit_ms;
    if (!ok || !in_time) ++failures;
    printf("%s  criterion %2d: %-58s (%.1f ms, limit %.0f ms)\n",
           (ok && in_time) ? "PASS" : "FAIL", crit, what, ms, limit_ms);
    fflush(stdout);
}

double relerr(double got, double want) {
    return std::fabs(got - want) / std::max({1e-8, std::fabs(got), std::fabs(want)});
}

struct Timer {
    Clock::time_point t0 = Clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }
};

// --- criterion 1: scatter golden ---------------------------------------------

void criterion1() {
    Timer t;
    auto src = ConcreteArray::from_reals(Shape{9}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto got = scatter(Shape{6}, src, 1,
                       [](const IndexV& ix) { return IndexV{floordiv(ix[0], 2)}; });
    bool ok = got == ConcreteArray::from_reals(Shape{6}, {3, 7, 11, 15, 9, 0});
    report(1, "scatter <6> [1..9] (i div 2) = [3,7,11,15,9,0]", ok, t.ms(), 1.0);
}

// --- criterion 2: BOT goldens -------------------------------------------------

void criterion2() {
    bool ok = true;
    double worst_ms = 0;
    {
        Timer t;
        TypeEnv env{{"a", ArrayType{Kind::Real, Shape{5}}}};
        TermPtr u = parse_term("(build1 5 (lam i (op + (index a [i]) 1.0)))");
        check(u, env);
        IdGen ids(1000);
        TermPtr nf = normalize(u, env, ids);
        ok = ok && alpha_eq(nf, parse_term("(op + (gather [5] a (lam [i] [i])) "
                                           "(replicate 5 1.0))"));
        worst_ms = std::max(worst_ms, t.ms());
    }
    {
        Timer t;
        TypeEnv env{{"a", ArrayType{Kind::Real, Shape{3}}}};
        TermPtr u = parse_term(
            "(sumouter (build1 3 (lam i (op * (index a [i]) (index a [(op - 2 i)])))))");
        check(u, env);
        IdGen ids(1000);
        TermPtr nf = normalize(u, env, ids);
        ok = ok && alpha_eq(nf, parse_term("(sumouter (op * (gather [3] a (lam [i] [i])) "
                                           "(gather [3] a (lam [i] [(op - 2 i)]))))"));
        worst_ms = std::max(worst_ms, t.ms());
    }
    report(2, "BOT goldens: gather+replicate form and t_sc bulk form (each)", ok, worst_ms,
           10.0);
}

// --- criteria 3+4: normal forms and semantics preservation on 500 programs ----

void criteria34() {
    std::vector<Program> corpus;
    std::vector<TermPtr> normals;
    Timer t3;
    bool ok3 = true;
    for (uint64_t seed = 1; seed <= 500; ++seed) {
        Program p = gen_program(seed);
        TypeEnv env = env_of_params(p.params);
        check(p.body, env);
        IdGen ids(1000000);
        TermPtr nf = normalize(p.body, env, ids);
        check(nf, env);
        auto rep = check_normal_form(nf);
        if (!rep.ok()) {
            ok3 = false;
            fprintf(stderr, "  seed %llu: %zu violations\n", (unsigned long long)seed,
                    rep.violations.size());
        }
        corpus.push_back(std::move(p));
        normals.push_back(nf);
    }
    report(3, "normal forms on 500 generated programs (no build1, index heads ok)", ok3,
           t3.ms(), 30000.0);

    Timer t4;
    bool ok4 = true;
    for (size_t i = 0; i < corpus.size(); ++i) {
        for (int rep = 0; rep < 3; ++rep) {
            ValueEnv in = gen_input((uint64_t)(i + 1) * 31 + (uint64_t)rep, corpus[i].params);
            double a = eval(corpus[i].body, in).scalar_r();
            double b = eval(normals[i], in).scalar_r();
            if (relerr(a, b) > 1e-10) {
                ok4 = false;
                fprintf(stderr, "  seed %zu: %.17g vs %.17g\n", i + 1, a, b);
            }
        }
    }
    // discrete results must be preserved exactly
    {
        struct { const char* src; const char* param; ArrayType ty; } cases[] = {
            {"(build1 6 (lam i (op * i 2)))", "", {}},
            {"(index (build1 4 (lam i (op mod (op + i k) 4))) [2])", "k",
             ArrayType{Kind::Int, Shape{}}},
            {"(build1 3 (lam i (op == (op mod i 2) 0)))", "", {}},
        };
        for (auto& c : cases) {
            TypeEnv env;
            ValueEnv in;
            if (c.param[0]) {
                env[c.param] = c.ty;
                in[c.param] = ConcreteArray::scalar_int(3);
            }
            TermPtr u = parse_term(c.src);
            check(u, env);
            IdGen ids(1000);
            TermPtr nf = normalize(u, env, ids);
            check(nf, env);
            if (!(eval(u, in) == eval(nf, in))) {
                ok4 = false;
                fprintf(stderr, "  discrete case changed: %s\n", c.src);
            }
        }
    }
    report(4, "BOT preserves semantics (500 programs x 3 inputs, 1e-10 rel)", ok4, t4.ms(),
           60000.0);
}

// --- criterion 5: gradient correctness against finite differences -------------

void criterion5() {
    Timer t;
    bool ok = true;
    for (auto& sp : adl_tests::gradient_suite()) {
        Program p = parse_program(sp.source);
        TypeEnv env = env_of_params(p.params);
        check(p.body, env);
        IdGen ids(1000000);
        TermPtr bot = normalize(p.body, env, ids);
        check(bot, env);
        for (int k = 0; k < 5; ++k) {
            ValueEnv in = adl_tests::suite_input(p, 1000 + (uint64_t)k * 17);
            auto conc = grad_concrete(bot, p.params, in, ConcreteArray::scalar_real(1.0));
            auto fd = finite_diff_grad(p.body, p.params, in);
            for (auto& [name, g] : fd) {
                for (int64_t i = 0; i < g.count(); ++i) {
                    if (relerr(conc.grad.at(name).real_at(i), g.real_at(i)) > 1e-4) {
                        ok = false;
                        fprintf(stderr, "  %s grad[%s][%lld]: %.12g vs fd %.12g\n",
                                sp.name.c_str(), name.c_str(), (long long)i,
                                conc.grad.at(name).real_at(i), g.real_at(i));
                    }
                }
            }
        }
    }
    report(5, "12-program suite x 5 inputs: gradients vs central differences", ok, t.ms(),
           30000.0);
}

// --- criterion 6: symbolic equals concrete, compiled once ---------------------

void criterion6() {
    Timer t;
    bool ok = true;
    for (auto& sp : adl_tests::gradient_suite()) {
        Program p = parse_program(sp.source);
        GradientProgram gp = build_gradient_program(p);  // differentiate once
        TypeEnv env = env_of_params(p.params);
        IdGen ids(900000);
        TermPtr bot = normalize(p.body, env, ids);
        check(bot, env);
        for (int k = 0; k < 10; ++k) {
            ValueEnv in = adl_tests::suite_input(p, 4000 + (uint64_t)k * 13);
            auto sym = eval_gradient_program(gp, in, ConcreteArray::scalar_real(1.0));
            auto conc = grad_concrete(bot, p.params, in, ConcreteArray::scalar_real(1.0));
            if (relerr(sym.value.scalar_r(), conc.value.scalar_r()) > 1e-12) ok = false;
            for (auto& [name, g] : conc.grad) {
                const ConcreteArray& sg = sym.grad.at(name);
                for (int64_t i = 0; i < g.count(); ++i)
                    if (relerr(sg.real_at(i), g.real_at(i)) > 1e-12) {
                        ok = false;
                        fprintf(stderr, "  %s: grad[%s][%lld] %.17g vs %.17g\n", sp.name.c_str(),
                                name.c_str(), (long long)i, sg.real_at(i), g.real_at(i));
                    }
            }
        }
    }
    report(6, "gradient programs = concrete gradients (1e-12), reused over 10 inputs", ok,
           t.ms(), 10000.0);
}

// --- criterion 7: constant trace size -----------------------------------------

void criterion7() {
    Timer t;
    int64_t counts[3] = {0, 0, 0};
    int64_t ns[3] = {8, 64, 512};
    for (int k = 0; k < 3; ++k) {
        std::string src = "(params (a f64 [" + std::to_string(ns[k]) + "]) (b f64 [" +
                          std::to_string(ns[k]) + "]))\n(sumouter (build1 " +
                          std::to_string(ns[k]) +
                          " (lam i (op * (index a [i]) (index b [i])))))";
        Program p = parse_program(src);
        TypeEnv env = env_of_params(p.params);
        check(p.body, env);
        IdGen ids(1000000);
        TermPtr bot = normalize(p.body, env, ids);
        check(bot, env);
        ValueEnv in = gen_input(7, p.params);
        IdGen dids;
        ConcForward fwd = forward_concrete(bot, p.params, in, dids);
        counts[k] = delta_node_count(fwd.delta);
    }
    bool ok = counts[0] == counts[1] && counts[1] == counts[2] && counts[0] > 0;
    char what[96];
    snprintf(what, sizeof what, "dot-product trace has %lld nodes for n=8,64,512",
             (long long)counts[0]);
    report(7, what, ok, t.ms(), 5000.0);
}

// --- criterion 8: sharing complexity on the doubling chain --------------------

void criterion8() {
    Timer t;
    const int n = 30;
    std::string body = "(op + x x)";
    for (int i = 1; i < n; ++i)
        body = "(let (x" + std::to_string(i) + " " + body + ") (op + x" + std::to_string(i) +
               " x" + std::to_string(i) + "))";
    Program p = parse_program("(params (x f64 []))\n" + body);
    TypeEnv env = env_of_params(p.params);
    check(p.body, env);
    IdGen ids(1000000);
    TermPtr bot = normalize(p.body, env, ids);
    check(bot, env);
    ValueEnv in{{"x", ConcreteArray::scalar_real(1.0)}};
    auto r = grad_concrete(bot, p.params, in, ConcreteArray::scalar_real(1.0));
    bool ok = r.grad.at("x").scalar_r() == std::pow(2.0, 30) && r.eval_visits <= 4 * n;
    char what[96];
    snprintf(what, sizeof what, "doubling chain n=30: grad = 2^30, %ld visits <= %d",
             r.eval_visits, 4 * n);
    report(8, what, ok, t.ms(), 100.0);
}

// --- criterion 9: sharing discipline over a pipeline corpus -------------------

void criterion9() {
    Timer t;
    bool ok = true;
    int programs = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        Program p = gen_program(seed);
        TypeEnv env = env_of_params(p.params);
        check(p.body, env);
        IdGen ids(1000000);
        TermPtr bot = normalize(p.body, env, ids);
        check(bot, env);
        ValueEnv in = gen_input(seed * 3 + 1, p.params);

        // concrete trace invariants
        IdGen dids;
        ConcForward fwd = forward_concrete(bot, p.params, in, dids);
        if (!scan_delta(fwd.delta).ok) ok = false;

        // symbolic trace and cotangent-term invariants
        IdGen sids(2000000);
        DualTerm dt = dualize(bot, p.params, sids);
        if (!scan_delta(dt.dual).ok) ok = false;
        auto grads = sym_reverse_pass(sids, t_var("ctg"), dt.dual);

        ValueEnv genv = in;
        genv["ctg"] = ConcreteArray::scalar_real(1.0);
        for (auto& [name, bound] : dt.primal_binds) genv[name] = eval(bound, genv);
        for (auto& [dvar, g] : grads) {
            if (!scan_share_discipline(g).empty()) ok = false;
            auto memo = eval_memo(g, genv);
            for (auto& [id, cnt] : memo.share_eval_counts)
                if (cnt > 1) ok = false;
            TermPtr conv = share_to_let(g);
            if (contains_share(conv)) ok = false;
            auto direct = eval(conv, genv);
            for (int64_t i = 0; i < direct.count(); ++i)
                if (relerr(direct.real_at(i), memo.value.real_at(i)) > 1e-12) ok = false;
        }

        // the full wrapper output is Share-free and scope-correct
        GradientProgram gp = build_gradient_program(p);
        if (contains_share(gp.prog.body)) ok = false;
        if (!scan_share_discipline(gp.prog.body).empty()) ok = false;
        ++programs;
    }
    char what[96];
    snprintf(what, sizeof what,
             "share discipline: Inv-1/Inv-2, memo counts <= 1, share-free outputs (%d programs)",
             programs);
    report(9, what, ok, t.ms(), 30000.0);
}

// --- criterion 10: the self-convolution compiles to the let-form gradient -----

void criterion10() {
    Timer t;
    Program p = parse_program(
        "(params (a f64 [3]))\n"
        "(sumouter (build1 3 (lam i (op * (index a [i]) (index a [(op - 2 i)])))))");
    GradientProgram gp = build_gradient_program(p);
    bool ok = !contains_share(gp.prog.body);

    TermPtr body = gp.prog.body;
    std::string x1, x2;
    if (body->tag == TermTag::Let) x1 = body->name;
    if (body->tag == TermTag::Let && body->b->tag == TermTag::Let) x2 = body->b->name;
    TermPtr tup = body;
    while (tup->tag == TermTag::Let) tup = tup->b;
    if (tup->tag != TermTag::Tuple || tup->kids.size() != 2) {
        ok = false;
    } else {
        TermPtr g = subst(tup->kids[1], gp.cotangent_name, t_real(1.0));
        TermPtr want = parse_term(
            "(let (shared1 (replicate 3 (array f64 [] [1])))"
            " (op + (scatter [3] (op * x2 shared1) (lam [i] [i]))"
            "       (scatter [3] (op * x1 shared1) (lam [i] [(op - 2 i)]))))");
        ok = ok && alpha_eq(want, g, {{"x1", x1}, {"x2", x2}});
    }
    report(10, "t_sc compiles to `let shared = replicate n [1.0] in scatter + scatter`", ok,
           t.ms(), 10.0);
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criteria34();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    if (failures) {
        printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    printf("all acceptance criteria passed\n");
    return 0;
}
