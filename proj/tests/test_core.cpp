#include <doctest.h>

#include "adl/check.hpp"
#include "adl/interp.hpp"
#include "adl/oracle.hpp"
#include "adl/parser.hpp"

using namespace adl;

TEST_CASE("parse basics") {
    TermPtr t = parse_term("(index a [i])");
    CHECK(t->tag == TermTag::Index);
    CHECK(t->a->tag == TermTag::Var);
    CHECK(t->a->name == "a");
    REQUIRE(t->ix.size() == 1);
    CHECK(t->ix[0]->name == "i");

    CHECK(parse_term("3")->literal.scalar_i() == 3);
    CHECK(parse_term("3.5")->literal.scalar_r() == 3.5);
    CHECK(parse_term("(array f64 [2,2] [1,2,3,4])")->literal.shape() == Shape{2, 2});
    CHECK_THROWS_AS(parse_term("(frobnicate x)"), ParseError);
    CHECK_THROWS_AS(parse_term("(index a [i]"), ParseError);
}

TEST_CASE("print/parse round trip preserves structure modulo renaming") {
    const char* sources[] = {
        "(let (x (op + a b)) (op * x x))",
        "(cond (op > (index a [0]) 0.0) a b)",
        "(gather [3] a (lam [i] [(op - 2 i)]))",
        "(scatter [6] a (lam [i] [(op div i 2)]))",
        "(build1 3 (lam i (index a [i])))",
        "(sumouter (ravel (index a [0]) (index a [1])))",
        "(reshape [4] (tr [1,0] m))",
        "(replicate 3 (array f64 [] [1.5]))",
        "(onehot [3] [1] (array f64 [] [2]))",
        "(share 4 (op + a a))",
        "(index (array i64 [3] [0,1,2]) [(op mod i 3)])",
    };
    for (const char* s : sources) {
        TermPtr t = parse_term(s);
        TermPtr t2 = parse_term(print_term(t));
        CHECK(alpha_eq(t, t2));
    }
    // and a corpus of generated programs
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        Program p = gen_program(seed);
        Program p2 = parse_program(print_program(p));
        CHECK(p2.params.size() == p.params.size());
        CHECK(alpha_eq(p.body, p2.body));
    }
}

TEST_CASE("the Fig-19-style self-convolution source round-trips") {
    const char* src =
        "(params (a f64 [3]))\n"
        "(sumouter (build1 3 (lam i (op * (index a [i]) (index a [(op - 2 i)])))))";
    Program p = parse_program(src);
    CHECK(p.params.size() == 1);
    Program p2 = parse_program(print_program(p));
    CHECK(alpha_eq(p.body, p2.body));
}

TEST_CASE("free_vars") {
    CHECK(free_vars(parse_term("(build1 3 (lam i a))")) == std::set<std::string>{"a"});
    CHECK(free_vars(parse_term("(let (x u) x)")) == std::set<std::string>{"u"});
    CHECK(free_vars(parse_term("(gather [3] a (lam [i] [(op + i m)]))")) ==
          std::set<std::string>{"a", "m"});
    CHECK(free_vars(parse_term("(let (x u) y)")) == std::set<std::string>{"u", "y"});
}

TEST_CASE("alpha equivalence") {
    CHECK(alpha_eq(parse_term("(let (x a) x)"), parse_term("(let (y a) y)")));
    CHECK(!alpha_eq(parse_term("(let (x a) x)"), parse_term("(let (y a) a)")));
    CHECK(alpha_eq(parse_term("(share 1 (op + (share 2 a) (share 2 a)))"),
                   parse_term("(share 5 (op + (share 3 a) (share 3 a)))")));
    CHECK(!alpha_eq(parse_term("(op + (share 1 a) (share 2 a))"),
                    parse_term("(op + (share 1 a) (share 1 a))")));
    CHECK(alpha_eq(parse_term("(build1 2 (lam i i))"), parse_term("(build1 2 (lam j j))")));
}

TEST_CASE("substitution avoids capture") {
    // [x := i] inside build1 that binds i must rename the binder
    TermPtr t = parse_term("(build1 3 (lam i (op + i x)))");
    TermPtr r = subst(t, "x", t_var("i"));
    // result must NOT be (build1 3 (lam i (op + i i)))
    CHECK(!alpha_eq(r, parse_term("(build1 3 (lam i (op + i i)))")));
    ValueEnv env{{"i", ConcreteArray::scalar_int(7)}};
    check(r, TypeEnv{{"i", ArrayType{Kind::Int, Shape{}}}});
    CHECK(eval(r, env) == ConcreteArray::from_ints(Shape{3}, {7, 8, 9}));
}

TEST_CASE("check annotates and reports errors") {
    // matmat at concrete shapes: a:<2,3> x b:<3,4> -> <2,4>
    const char* matmat =
        "(build1 2 (lam i (build1 4 (lam j (sumouter (build1 3 (lam p "
        "(op * (index a [i p]) (index b [p j])))))))))";
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{2, 3}}},
                {"b", ArrayType{Kind::Real, Shape{3, 4}}}};
    ArrayType ty = check(parse_term(matmat), env);
    CHECK(ty.kind == Kind::Real);
    CHECK(ty.shape == Shape{2, 4});

    TypeEnv env2{{"x", ArrayType{Kind::Real, Shape{2, 3}}}};
    try {
        check(parse_term("(reshape [5] x)"), env2);
        CHECK(false);
    } catch (const CheckError& e) {
        CHECK(e.code == "ReshapeProductMismatch");
    }
    try {
        check(parse_term("(tr [0,0] x)"), env2);
        CHECK(false);
    } catch (const CheckError& e) {
        CHECK(e.code == "PermutationInvalid");
    }
    try {
        check(parse_term("y"), env2);
        CHECK(false);
    } catch (const CheckError& e) {
        CHECK(e.code == "UnboundVar");
    }
    try {
        check(parse_term("(cond x x x)"), env2);
        CHECK(false);
    } catch (const CheckError& e) {
        CHECK(e.code == "CondScrutineeNotRank0Bool");
    }
    try {
        TypeEnv env3{{"m", ArrayType{Kind::Bool, Shape{3}}}};
        check(parse_term("(scatter [3] m (lam [i] [i]))"), env3);
        CHECK(false);
    } catch (const CheckError& e) {
        CHECK(e.code == "ScatterNonNumeric");
    }
    try {
        check(parse_term("(op + x (array f64 [2] [0,0]))"), env2);
        CHECK(false);
    } catch (const CheckError& e) {
        CHECK(e.code == "ShapeMismatch");
    }
}

TEST_CASE("eval: self-convolution, build1, matmat") {
    // t_sc at n=3, a=[1,2,3]: 1*3 + 2*2 + 3*1 = 10
    const char* sc =
        "(sumouter (build1 3 (lam i (op * (index a [i]) (index a [(op - 2 i)])))))";
    TermPtr t = parse_term(sc);
    TypeEnv tenv{{"a", ArrayType{Kind::Real, Shape{3}}}};
    check(t, tenv);
    ValueEnv env{{"a", ConcreteArray::from_reals(Shape{3}, {1, 2, 3})}};
    CHECK(eval(t, env).scalar_r() == 10.0);

    TermPtr b = parse_term("(build1 3 (lam i i))");
    check(b, {});
    CHECK(eval(b, {}) == ConcreteArray::from_ints(Shape{3}, {0, 1, 2}));

    const char* matmat =
        "(build1 2 (lam i (build1 2 (lam j (sumouter (build1 2 (lam p "
        "(op * (index a [i p]) (index b [p j])))))))))";
    TermPtr mm = parse_term(matmat);
    TypeEnv menv{{"a", ArrayType{Kind::Real, Shape{2, 2}}},
                 {"b", ArrayType{Kind::Real, Shape{2, 2}}}};
    check(mm, menv);
    ValueEnv vals{{"a", ConcreteArray::from_reals(Shape{2, 2}, {1, 2, 3, 4})},
                  {"b", ConcreteArray::from_reals(Shape{2, 2}, {5, 6, 7, 8})}};
    CHECK(eval(mm, vals) == ConcreteArray::from_reals(Shape{2, 2}, {19, 22, 43, 50}));
}

TEST_CASE("strict cond evaluates everything, selects one") {
    // a total (never crashing) index keeps the unselected branch harmless
    TermPtr t = parse_term("(cond (op > i 9) (index a [i]) (array f64 [] [0]))");
    TypeEnv tenv{{"a", ArrayType{Kind::Real, Shape{3}}}, {"i", ArrayType{Kind::Int, Shape{}}}};
    check(t, tenv);
    ValueEnv env{{"a", ConcreteArray::from_reals(Shape{3}, {1, 2, 3})},
                 {"i", ConcreteArray::scalar_int(12)}};
    CHECK(eval(t, env).scalar_r() == 0.0);  // selected else-branch; index was OOB but total
}

TEST_CASE("eval_memo memoises share bodies") {
    TermPtr u = parse_term("(sumouter (op * a a))");
    TermPtr sh = t_share(1, u);
    TermPtr t = t_op(Op::Add, {sh, sh});
    TypeEnv tenv{{"a", ArrayType{Kind::Real, Shape{3}}}};
    check(t, tenv);
    ValueEnv env{{"a", ConcreteArray::from_reals(Shape{3}, {1, 2, 3})}};
    auto r = eval_memo(t, env);
    CHECK(r.value.scalar_r() == 28.0);
    CHECK(r.share_eval_counts.size() == 1);
    CHECK(r.share_eval_counts.at(1) == 1);
    // share-free terms: eval_memo equals eval of the stripped term
    CHECK(r.value == eval(strip_share(t), env));
}

TEST_CASE("evaluation is deterministic") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        Program p = gen_program(seed);
        check_program(p);
        ValueEnv in = gen_input(seed, p.params);
        auto a = eval(p.body, in);
        auto b = eval(p.body, in);
        CHECK(a == b);
    }
}

TEST_CASE("share/let discipline scan") {
    CHECK(scan_share_discipline(parse_term("(let (x a) (op + x x))")).empty());
    CHECK(scan_share_discipline(parse_term("(op + (share 1 a) (share 2 b))")).empty());
    CHECK(!scan_share_discipline(parse_term("(let (x a) (share 1 x))")).empty());
    CHECK(!scan_share_discipline(parse_term("(share 2 (let (x a) x))")).empty());
    // ids must decrease inward
    CHECK(scan_share_discipline(parse_term("(share 5 (share 2 a))")).empty());
    CHECK(!scan_share_discipline(parse_term("(share 1 (share 5 a))")).empty());
    // index payloads may contain lets but not shares
    CHECK(scan_share_discipline(parse_term("(gather [3] a (lam [i] [(let (j i) j)]))")).empty());
    CHECK(!scan_share_discipline(parse_term("(gather [3] a (lam [i] [(share 1 i)]))")).empty());
}

TEST_CASE("duplicate index binders are rejected") {
    TypeEnv env{{"a", ArrayType{Kind::Real, Shape{3, 3}}}};
    CHECK_THROWS_AS(check(parse_term("(gather [3,3] a (lam [i i] [i i]))"), env), CheckError);
    // shadowing an outer binder is fine
    CHECK_NOTHROW(check(
        parse_term("(gather [3] a (lam [i] [(index (build1 3 (lam i i)) [i]) i]))"), env));
}
