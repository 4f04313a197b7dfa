// Command-line driver for the array-language AD pipeline.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adl/bot.hpp"
#include "adl/check.hpp"
#include "adl/interp.hpp"
#include "adl/oracle.hpp"
#include "adl/parser.hpp"
#include "adl/reverse.hpp"
#include "adl/symbolic.hpp"

using nlohmann::json;
using namespace adl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json array_to_json(const ConcreteArray& a) {
    json j;
    j["kind"] = kind_name(a.kind());
    j["shape"] = a.shape().dims;
    json data = json::array();
    for (int64_t i = 0; i < a.count(); ++i) {
        switch (a.kind()) {
            case Kind::Real: data.push_back(a.real_at(i)); break;
            case Kind::Int: data.push_back(a.int_at(i)); break;
            case Kind::Bool: data.push_back(a.bool_at(i)); break;
        }
    }
    j["data"] = std::move(data);
    return j;
}

ConcreteArray array_from_json(const json& j) {
    Shape sh(j.at("shape").get<std::vector<int64_t>>());
    std::string kind = j.at("kind").get<std::string>();
    const json& data = j.at("data");
    if (kind == "f64") {
        std::vector<double> d;
        for (auto& v : data) d.push_back(v.get<double>());
        return ConcreteArray::from_reals(sh, std::move(d));
    }
    if (kind == "i64") {
        std::vector<int64_t> d;
        for (auto& v : data) d.push_back(v.get<int64_t>());
        return ConcreteArray::from_ints(sh, std::move(d));
    }
    if (kind == "bool") {
        std::vector<uint8_t> d;
        for (auto& v : data) d.push_back(v.get<bool>() ? 1 : 0);
        return ConcreteArray::from_bools(sh, std::move(d));
    }
    throw std::runtime_error("unknown kind " + kind);
}

ValueEnv inputs_from_file(const std::string& path) {
    json j = json::parse(slurp(path));
    ValueEnv env;
    for (auto& [k, v] : j.items()) env[k] = array_from_json(v);
    return env;
}

Program load_checked(const std::string& path) {
    Program p = parse_program(slurp(path));
    check_program(p);
    return p;
}

// Inputs must cover every parameter at the declared kind and shape.
void validate_inputs(const Program& p, const ValueEnv& env) {
    for (auto& prm : p.params) {
        auto it = env.find(prm.name);
        if (it == env.end())
            throw std::runtime_error("missing input for parameter " + prm.name);
        if (it->second.kind() != prm.type.kind || it->second.shape() != prm.type.shape)
            throw std::runtime_error("input " + prm.name + " has type " +
                                     std::string(kind_name(it->second.kind())) + " " +
                                     it->second.shape().str() + ", declared " + prm.type.str());
    }
}

double rel_err(double got, double want) {
    double scale = std::max({1e-8, std::fabs(got), std::fabs(want)});
    return std::fabs(got - want) / scale;
}

// Absolute deviations below the floor are noise (central differences cannot
// resolve them); above it, the relative tolerance applies.
bool grad_close(double got, double want, double tol, double abs_floor = 1e-8) {
    if (std::fabs(got - want) <= abs_floor) return true;
    return std::fabs(got - want) <= tol * std::max(std::fabs(got), std::fabs(want));
}

// Shared by gradcheck and selftest: concrete + symbolic gradients against
// central finite differences.
bool gradcheck_one(const Program& p, const ValueEnv& inputs, double h, double tol,
                   bool verbose) {
    TypeEnv env = env_of_params(p.params);
    IdGen ids(1000000);
    TermPtr bot = normalize(p.body, env, ids);
    auto fd = finite_diff_grad(p.body, p.params, inputs, h);
    auto conc = grad_concrete(bot, p.params, inputs, ConcreteArray::scalar_real(1.0));
    GradientProgram gp = build_gradient_program(p);
    auto sym = eval_gradient_program(gp, inputs, ConcreteArray::scalar_real(1.0));

    bool ok = true;
    for (auto& [name, g] : fd) {
        const ConcreteArray& cg = conc.grad.at(name);
        const ConcreteArray& sg = sym.grad.at(name);
        for (int64_t i = 0; i < g.count(); ++i) {
            if (!grad_close(cg.real_at(i), g.real_at(i), tol)) {
                ok = false;
                if (verbose)
                    fprintf(stderr, "grad[%s][%lld]: concrete %.12g vs fd %.12g\n", name.c_str(),
                            (long long)i, cg.real_at(i), g.real_at(i));
            }
            // the two differentiation modes perform the same arithmetic
            if (rel_err(sg.real_at(i), cg.real_at(i)) > 1e-12) {
                ok = false;
                if (verbose)
                    fprintf(stderr, "grad[%s][%lld]: symbolic %.12g vs concrete %.12g\n",
                            name.c_str(), (long long)i, sg.real_at(i), cg.real_at(i));
            }
        }
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"array-language reverse-AD pipeline"};
    app.set_help_flag("--help", "print help");  // keep --h free for the step size
    app.require_subcommand(1);

    std::string file, inputs_path, out_path;
    double ctg = 1.0, h = 1e-4, tol = 1e-4;
    uint64_t seed = 1;
    int seeds = 50;
    bool simplify = false;

    auto* c_check = app.add_subcommand("check", "shape-check a program and print its type");
    c_check->add_option("file", file)->required();

    auto* c_eval = app.add_subcommand("eval", "evaluate a program on inputs");
    c_eval->add_option("file", file)->required();
    c_eval->add_option("--inputs", inputs_path)->required();

    auto* c_vec = app.add_subcommand("vectorize", "print the bulk-operation form");
    c_vec->add_option("file", file)->required();
    c_vec->add_flag("--simplify", simplify);

    auto* c_grad = app.add_subcommand("grad", "concrete-mode gradient");
    c_grad->add_option("file", file)->required();
    c_grad->add_option("--inputs", inputs_path)->required();
    c_grad->add_option("--ctg", ctg);

    auto* c_comp = app.add_subcommand("compile-grad", "emit a standalone gradient program");
    c_comp->add_option("file", file)->required();
    c_comp->add_option("-o,--output", out_path);

    auto* c_gc = app.add_subcommand("gradcheck", "compare gradients against finite differences");
    c_gc->add_option("file", file)->required();
    c_gc->add_option("--seed", seed);
    c_gc->add_option("--h", h);
    c_gc->add_option("--tol", tol);

    auto* c_st = app.add_subcommand("selftest", "random-corpus pipeline checks");
    c_st->add_option("--seeds", seeds);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_check->parsed()) {
            Program p = parse_program(slurp(file));
            auto tys = check_program(p);
            for (auto& ty : tys) printf("%s\n", ty.str().c_str());
            return 0;
        }
        if (c_eval->parsed()) {
            Program p = load_checked(file);
            ValueEnv env = inputs_from_file(inputs_path);
            validate_inputs(p, env);
            auto vals = eval_multi(p.body, env);
            if (vals.size() == 1) {
                printf("%s\n", array_to_json(vals[0]).dump().c_str());
            } else {
                json j = json::array();
                for (auto& v : vals) j.push_back(array_to_json(v));
                printf("%s\n", j.dump().c_str());
            }
            return 0;
        }
        if (c_vec->parsed()) {
            Program p = load_checked(file);
            IdGen ids(1000000);
            BotOptions opts;
            opts.simplify = simplify;
            Program out{p.params, normalize(p.body, env_of_params(p.params), ids, opts)};
            printf("%s", print_program(out).c_str());
            return 0;
        }
        if (c_grad->parsed()) {
            Program p = load_checked(file);
            ValueEnv env = inputs_from_file(inputs_path);
            validate_inputs(p, env);
            IdGen ids(1000000);
            TermPtr bot = normalize(p.body, env_of_params(p.params), ids);
            auto r = grad_concrete(bot, p.params, env, ConcreteArray::scalar_real(ctg));
            json j;
            for (auto& [name, g] : r.grad) j[name] = array_to_json(g);
            printf("%s\n", j.dump().c_str());
            return 0;
        }
        if (c_comp->parsed()) {
            Program p = load_checked(file);
            GradientProgram gp = build_gradient_program(p);
            std::string text = print_program(gp.prog);
            if (out_path.empty()) {
                printf("%s", text.c_str());
            } else {
                std::ofstream out(out_path);
                out << text;
            }
            return 0;
        }
        if (c_gc->parsed()) {
            Program p = load_checked(file);
            ValueEnv env = gen_input(seed, p.params);
            bool ok = gradcheck_one(p, env, h, tol, true);
            if (!ok) return 2;
            printf("gradcheck ok\n");
            return 0;
        }
        if (c_st->parsed()) {
            int failures = 0;
            for (int s = 1; s <= seeds; ++s) {
                Program p = gen_program((uint64_t)s);
                TypeEnv env = env_of_params(p.params);
                IdGen ids(1000000);
                TermPtr bot = normalize(p.body, env, ids);
                auto rep = check_normal_form(bot);
                if (!rep.ok()) {
                    fprintf(stderr, "seed %d: normal-form violation\n", s);
                    ++failures;
                    continue;
                }
                ValueEnv in = gen_input((uint64_t)s * 77 + 5, p.params);
                double a = eval(p.body, in).scalar_r();
                double b = eval(bot, in).scalar_r();
                if (rel_err(a, b) > 1e-10) {
                    fprintf(stderr, "seed %d: BOT changed semantics (%.12g vs %.12g)\n", s, a, b);
                    ++failures;
                    continue;
                }
                if (!gradcheck_one(p, in, h, tol, false)) {
                    fprintf(stderr, "seed %d: gradcheck failed\n", s);
                    ++failures;
                }
            }
            if (failures) {
                fprintf(stderr, "%d/%d seeds failed\n", failures, seeds);
                return 2;
            }
            printf("selftest ok (%d seeds)\n", seeds);
            return 0;
        }
    } catch (const ParseError& e) {
        fprintf(stderr, "parse error: %s\n", e.what());
        return 1;
    } catch (const CheckError& e) {
        fprintf(stderr, "check error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
