#include <doctest.h>

#include <cmath>

#include "adl/bot.hpp"
#include "adl/interp.hpp"
#include "adl/oracle.hpp"
#include "adl/parser.hpp"

using namespace adl;

namespace {

TermPtr norm(const char* src, const TypeEnv& env, RewriteOrder order = RewriteOrder::Outermost,
             bool simplify = false) {
    TermPtr t = parse_term(src);
    check(t, env);
    IdGen ids(1000);
    BotOptions opts;
    opts.order = order;
    opts.simplify = simplify;
    return normalize(t, env, ids, opts);
}

double relerr(double a, double b) {
    return std::fabs(a - b) / std::max({1e-8, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("build1-of-index-plus-constant becomes gather plus replicate") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{5}}}};
    TermPtr got = norm("(build1 5 (lam i (op + (index a [i]) 1.0)))", env);
    TermPtr want = parse_term("(op + (gather [5] a (lam [i] [i])) (replicate 5 1.0))");
    CHECK(alpha_eq(got, want));
}

TEST_CASE("self-convolution rewrites to its bulk form") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{3}}}};
    TermPtr got = norm(
        "(sumouter (build1 3 (lam i (op * (index a [i]) (index a [(op - 2 i)])))))", env);
    TermPtr want = parse_term(
        "(sumouter (op * (gather [3] a (lam [i] [i])) (gather [3] a (lam [i] [(op - 2 i)]))))");
    CHECK(alpha_eq(got, want));
}

TEST_CASE("iota build becomes a constant") {
    TermPtr got = norm("(build1 3 (lam i i))", {});
    CHECK(alpha_eq(got, parse_term("(array i64 [3] [0,1,2])")));
}

TEST_CASE("closed body becomes replicate") {
    TypeEnv env{{"x", ArrayType{Kind::Real, Shape{2}}}};
    TermPtr got = norm("(build1 4 (lam i x))", env);
    CHECK(alpha_eq(got, parse_term("(replicate 4 x)")));
}

TEST_CASE("normal-form checker classifies index heads") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{4}}},
                {"i", ArrayType{Kind::Int, Shape{}}}};
    TermPtr ok = parse_term("(index (scatter [4] a (lam [i] [i])) [1])");
    check(ok, env);
    CHECK(check_normal_form(ok).ok());

    TermPtr bad = parse_term("(build1 4 (lam i (index a [i])))");
    check(bad, env);
    auto rep = check_normal_form(bad);
    CHECK(!rep.ok());
    CHECK(rep.build1_count == 1);

    TermPtr badix = parse_term("(index (op + a a) [1])");
    check(badix, env);
    CHECK(!check_normal_form(badix).ok());

    TermPtr okravel = parse_term("(index (ravel 1.0 2.0) [i])");
    check(okravel, env);
    CHECK(check_normal_form(okravel).ok());
}

TEST_CASE("normalize clears every build1 and index redex on a corpus") {
    for (uint64_t seed = 1; seed <= 120; ++seed) {
        Program p = gen_program(seed);
        TypeEnv env = env_of_params(p.params);
        ArrayType ty = check(p.body, env);
        IdGen ids(100000);
        TermPtr nf = normalize(p.body, env, ids);
        auto rep = check_normal_form(nf);
        if (!rep.ok()) {
            for (auto& v : rep.violations) MESSAGE(v);
        }
        CHECK(rep.ok());
        // type preservation
        ArrayType ty2 = check(nf, env);
        CHECK(ty2 == ty);
    }
}

TEST_CASE("normalize preserves semantics") {
    for (uint64_t seed = 1; seed <= 80; ++seed) {
        Program p = gen_program(seed);
        TypeEnv env = env_of_params(p.params);
        check(p.body, env);
        IdGen ids(100000);
        TermPtr nf = normalize(p.body, env, ids);
        check(nf, env);
        for (int rep = 0; rep < 3; ++rep) {
            ValueEnv in = gen_input(seed * 31 + (uint64_t)rep, p.params);
            double a = eval(p.body, in).scalar_r();
            double b = eval(nf, in).scalar_r();
            CHECK(relerr(a, b) <= 1e-10);
        }
    }
}

TEST_CASE("rewrite order does not change the normal form") {
    for (uint64_t seed = 1; seed <= 40; ++seed) {
        Program p = gen_program(seed);
        TypeEnv env = env_of_params(p.params);
        check(p.body, env);
        IdGen ids1(100000), ids2(100000);
        BotOptions inner;
        inner.order = RewriteOrder::Innermost;
        TermPtr a = normalize(p.body, env, ids1);
        TermPtr b = normalize(p.body, env, ids2, inner);
        CHECK(alpha_eq(a, b));
    }
}

TEST_CASE("optional simplification collapses identity gathers") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{3}}}};
    const char* sc = "(sumouter (build1 3 (lam i (op * (index a [i]) (index a [(op - 2 i)])))))";
    TermPtr got = norm(sc, env, RewriteOrder::Outermost, /*simplify=*/true);
    TermPtr want =
        parse_term("(sumouter (op * a (gather [3] a (lam [i] [(op - 2 i)]))))");
    CHECK(alpha_eq(got, want));
    // off by default
    TermPtr plain = norm(sc, env);
    CHECK(!alpha_eq(plain, want));
}

TEST_CASE("let bodies vectorise through an intermediate binding") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{4}}}};
    const char* src =
        "(build1 4 (lam i (let (y (op * (index a [i]) (index a [i]))) (op + y y))))";
    TermPtr t = parse_term(src);
    check(t, env);
    IdGen ids(1000);
    TermPtr nf = normalize(t, env, ids);
    CHECK(check_normal_form(nf).ok());
    ValueEnv in{{"a", ConcreteArray::from_reals(Shape{4}, {1, 2, 3, 4})}};
    CHECK(eval(nf, in) == eval(t, in));
    // the binding survives as a bulk-level let
    CHECK(nf->tag == TermTag::Let);
}

TEST_CASE("cond under build1 vectorises via ravel selection") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{6}}}};
    const char* src =
        "(build1 6 (lam i (cond (op == (op mod i 2) 0) (index a [i]) 0.0)))";
    TermPtr t = parse_term(src);
    check(t, env);
    IdGen ids(1000);
    TermPtr nf = normalize(t, env, ids);
    CHECK(check_normal_form(nf).ok());
    ValueEnv in{{"a", ConcreteArray::from_reals(Shape{6}, {1, 2, 3, 4, 5, 6})}};
    CHECK(eval(nf, in) == ConcreteArray::from_reals(Shape{6}, {1, 0, 3, 0, 5, 0}));
}

TEST_CASE("index pushes through sumOuter, reshape and transpose") {
    TypeEnv env{{"m", ArrayType{Kind::Real, Shape{2, 3}}}};
    struct Case {
        const char* src;
        double want;
    } cases[] = {
        {"(index (sumouter m) [1])", 7.0},           // column sum 2+5
        {"(index (reshape [3,2] m) [2,1])", 6.0},    // row-major element 5
        {"(index (tr [1,0] m) [2,0])", 3.0},         // transposed element
        {"(index (replicate 4 m) [3,1,2])", 6.0},    // replicate drops the first index
    };
    ValueEnv in{{"m", ConcreteArray::from_reals(Shape{2, 3}, {1, 2, 3, 4, 5, 6})}};
    for (auto& c : cases) {
        TermPtr t = parse_term(c.src);
        check(t, env);
        IdGen ids(1000);
        TermPtr nf = normalize(t, env, ids);
        CHECK(check_normal_form(nf).ok());
        CHECK(eval(nf, in).scalar_r() == doctest::Approx(c.want).epsilon(1e-12));
        CHECK(eval(t, in).scalar_r() == doctest::Approx(c.want).epsilon(1e-12));
    }
}

TEST_CASE("let-of-var inliner") {
    TermPtr t = parse_term("(let (x y) (op + x x))");
    CHECK(alpha_eq(inline_let_of_var(t), parse_term("(op + y y)")));
    TermPtr keep = parse_term("(let (x (op + y y)) (op + x x))");
    CHECK(alpha_eq(inline_let_of_var(keep), keep));
}

TEST_CASE("index-of-let avoids capturing the index expression") {
    // the let binder shares its name with a variable free in the index
    TypeEnv env{{"j", ArrayType{Kind::Int, Shape{}}},
                {"a", ArrayType{Kind::Real, Shape{4, 2}}}};
    TermPtr t = parse_term("(index (let (j (op * a a)) (op + j j)) [(op + j 1)])");
    check(t, env);
    IdGen ids(1000);
    TermPtr nf = normalize(t, env, ids);
    check(nf, env);
    ValueEnv in{{"j", ConcreteArray::scalar_int(1)},
                {"a", ConcreteArray::from_reals(Shape{4, 2}, {1, 2, 3, 4, 5, 6, 7, 8})}};
    CHECK(eval(nf, in) == eval(t, in));  // row 2 of 2*(a*a)
    CHECK(eval(nf, in) == ConcreteArray::from_reals(Shape{2}, {50, 72}));
}

TEST_CASE("empty build sizes flow through the rewriter") {
    TermPtr t = parse_term("(sumouter (build1 0 (lam i (op * i i))))");
    check(t, {});
    IdGen ids(1000);
    TermPtr nf = normalize(t, {}, ids);
    check(nf, {});
    CHECK(check_normal_form(nf).ok());
    CHECK(eval(nf, {}) == ConcreteArray::scalar_int(0));
    CHECK(eval(t, {}) == ConcreteArray::scalar_int(0));
}

TEST_CASE("the optional simplify pass preserves semantics and normal forms") {
    for (uint64_t seed = 1; seed <= 40; ++seed) {
        Program p = gen_program(seed);
        TypeEnv env = env_of_params(p.params);
        ArrayType ty = check(p.body, env);
        IdGen ids(100000);
        BotOptions opts;
        opts.simplify = true;
        TermPtr nf = normalize(p.body, env, ids, opts);
        CHECK(check(nf, env) == ty);
        CHECK(check_normal_form(nf).ok());
        ValueEnv in = gen_input(seed * 13 + 2, p.params);
        double a = eval(p.body, in).scalar_r();
        double b = eval(nf, in).scalar_r();
        CHECK(relerr(a, b) <= 1e-10);
    }
}
