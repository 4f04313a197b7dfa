#include "adl/parser.hpp"

#include <cctype>
#include <cstdlib>

namespace adl {

namespace {

struct Token {
    enum Type { LParen, RParen, LBrack, RBrack, Atom, End } type;
    std::string text;
    int line, col;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= s_.size()) {
            t.type = Token::End;
            return t;
        }
        char c = s_[pos_];
        if (c == '(') { advance(); t.type = Token::LParen; return t; }
        if (c == ')') { advance(); t.type = Token::RParen; return t; }
        if (c == '[') { advance(); t.type = Token::LBrack; return t; }
        if (c == ']') { advance(); t.type = Token::RBrack; return t; }
        t.type = Token::Atom;
        while (pos_ < s_.size() && !isspace((unsigned char)s_[pos_]) && s_[pos_] != '(' &&
               s_[pos_] != ')' && s_[pos_] != '[' && s_[pos_] != ']' && s_[pos_] != ',' &&
               s_[pos_] != ';') {
            t.text += s_[pos_];
            advance();
        }
        return t;
    }

private:
    void advance() {
        if (s_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_ws() {
        for (;;) {
            while (pos_ < s_.size() && (isspace((unsigned char)s_[pos_]) || s_[pos_] == ','))
                advance();
            if (pos_ < s_.size() && s_[pos_] == ';') {  // line comment
                while (pos_ < s_.size() && s_[pos_] != '\n') advance();
                continue;
            }
            return;
        }
    }

    const std::string& s_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

class Parser {
public:
    explicit Parser(const std::string& s) : lex_(s) { cur_ = lex_.next(); }

    TermPtr expr() {
        if (cur_.type == Token::Atom) return atom_expr();
        expect(Token::LParen, "expression");
        Token head = take(Token::Atom, "form name");
        TermPtr t = form(head);
        expect(Token::RParen, "')'");
        return t;
    }

    Program program() {
        Program p;
        expect(Token::LParen, "(params ...)");
        Token head = take(Token::Atom, "params");
        if (head.text != "params") err("expected params header", head);
        while (cur_.type == Token::LParen) {
            next();
            Token name = take(Token::Atom, "parameter name");
            Token kind = take(Token::Atom, "parameter kind");
            Param prm;
            prm.name = name.text;
            if (!kind_from_name(kind.text, prm.type.kind)) err("unknown kind " + kind.text, kind);
            prm.type.shape = shape_list();
            expect(Token::RParen, "')'");
            p.params.push_back(std::move(prm));
        }
        expect(Token::RParen, "')'");
        p.body = expr();
        if (cur_.type != Token::End) err("trailing input after program body", cur_);
        return p;
    }

    void expect_end() {
        if (cur_.type != Token::End) err("trailing input", cur_);
    }

private:
    [[noreturn]] void err(const std::string& msg, const Token& t) { throw ParseError(msg, t.line, t.col); }

    void next() { cur_ = lex_.next(); }

    void expect(Token::Type ty, const std::string& what) {
        if (cur_.type != ty) err("expected " + what, cur_);
        next();
    }

    Token take(Token::Type ty, const std::string& what) {
        if (cur_.type != ty) err("expected " + what, cur_);
        Token t = cur_;
        next();
        return t;
    }

    static bool kind_from_name(const std::string& s, Kind& out) {
        if (s == "f64") { out = Kind::Real; return true; }
        if (s == "i64") { out = Kind::Int; return true; }
        if (s == "bool") { out = Kind::Bool; return true; }
        return false;
    }

    static bool is_number(const std::string& s) {
        if (s.empty()) return false;
        size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        if (i >= s.size()) return false;
        bool digit = false;
        for (; i < s.size(); ++i) {
            char c = s[i];
            if (isdigit((unsigned char)c)) { digit = true; continue; }
            if (c == '.' || c == 'e' || c == 'E' || c == '-' || c == '+') continue;
            return false;
        }
        return digit;
    }

    static bool is_integer(const std::string& s) {
        size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        for (; i < s.size(); ++i)
            if (!isdigit((unsigned char)s[i])) return false;
        return true;
    }

    // Bare atoms: numbers become rank-0 constants, identifiers variable refs.
    TermPtr atom_expr() {
        Token t = take(Token::Atom, "atom");
        if (is_number(t.text)) {
            if (is_integer(t.text)) return t_int(strtoll(t.text.c_str(), nullptr, 10));
            return t_real(strtod(t.text.c_str(), nullptr));
        }
        if (t.text == "true") return t_const(ConcreteArray::scalar_bool(true));
        if (t.text == "false") return t_const(ConcreteArray::scalar_bool(false));
        return t_var(t.text);
    }

    int64_t nat(const char* what) {
        Token t = take(Token::Atom, what);
        if (!is_number(t.text) || !is_integer(t.text)) err(std::string("expected ") + what, t);
        return strtoll(t.text.c_str(), nullptr, 10);
    }

    Shape shape_list() {
        expect(Token::LBrack, "'['");
        Shape sh;
        while (cur_.type == Token::Atom) sh.dims.push_back(nat("dimension"));
        expect(Token::RBrack, "']'");
        return sh;
    }

    std::vector<int> int_list() {
        expect(Token::LBrack, "'['");
        std::vector<int> v;
        while (cur_.type == Token::Atom) v.push_back((int)nat("integer"));
        expect(Token::RBrack, "']'");
        return v;
    }

    IxExpr ix_list() {
        expect(Token::LBrack, "'['");
        IxExpr ix;
        while (cur_.type != Token::RBrack && cur_.type != Token::End) ix.push_back(expr());
        expect(Token::RBrack, "']'");
        return ix;
    }

    IxFn ix_fn() {
        expect(Token::LParen, "(lam ...)");
        Token head = take(Token::Atom, "lam");
        if (head.text != "lam") err("expected lam", head);
        IxFn fn;
        expect(Token::LBrack, "'['");
        while (cur_.type == Token::Atom) fn.binders.push_back(take(Token::Atom, "binder").text);
        expect(Token::RBrack, "']'");
        fn.body = ix_list();
        expect(Token::RParen, "')'");
        return fn;
    }

    TermPtr array_literal(const Token& at) {
        Token kindTok = take(Token::Atom, "kind");
        Kind kind;
        if (!kind_from_name(kindTok.text, kind)) err("unknown kind " + kindTok.text, kindTok);
        Shape sh = shape_list();
        expect(Token::LBrack, "'['");
        std::vector<double> rd;
        std::vector<int64_t> id;
        std::vector<uint8_t> bd;
        while (cur_.type == Token::Atom) {
            Token v = take(Token::Atom, "datum");
            switch (kind) {
                case Kind::Real: rd.push_back(strtod(v.text.c_str(), nullptr)); break;
                case Kind::Int: id.push_back(strtoll(v.text.c_str(), nullptr, 10)); break;
                case Kind::Bool:
                    bd.push_back((uint8_t)((v.text == "1" || v.text == "true") ? 1 : 0));
                    break;
            }
        }
        expect(Token::RBrack, "']'");
        int64_t want = sh.count();
        int64_t got = (int64_t)(rd.size() + id.size() + bd.size());
        if (got != want) err("array literal has " + std::to_string(got) + " elements, shape wants " + std::to_string(want), at);
        switch (kind) {
            case Kind::Real: return t_const(ConcreteArray::from_reals(sh, std::move(rd)));
            case Kind::Int: return t_const(ConcreteArray::from_ints(sh, std::move(id)));
            case Kind::Bool: return t_const(ConcreteArray::from_bools(sh, std::move(bd)));
        }
        err("bad array literal", at);
    }

    TermPtr form(const Token& head) {
        const std::string& h = head.text;
        if (h == "let") {
            expect(Token::LParen, "(name expr)");
            Token name = take(Token::Atom, "binder");
            TermPtr bound = expr();
            expect(Token::RParen, "')'");
            TermPtr body = expr();
            return t_let(name.text, bound, body);
        }
        if (h == "cond") {
            TermPtr b = expr(), u = expr(), v = expr();
            return t_cond(b, u, v);
        }
        if (h == "op") {
            Token opTok = take(Token::Atom, "operator");
            Op op;
            if (!op_from_name(opTok.text, op)) err("unknown operator " + opTok.text, opTok);
            std::vector<TermPtr> args;
            while (cur_.type != Token::RParen && cur_.type != Token::End) args.push_back(expr());
            return t_op(op, std::move(args));
        }
        if (h == "index") {
            TermPtr a = expr();
            return t_index(a, ix_list());
        }
        if (h == "sumouter") return t_sum_outer(expr());
        if (h == "gather" || h == "scatter") {
            Shape sh = shape_list();
            TermPtr a = expr();
            IxFn fn = ix_fn();
            return h == "gather" ? t_gather(sh, a, fn) : t_scatter(sh, a, fn);
        }
        if (h == "ravel") {
            std::vector<TermPtr> parts;
            while (cur_.type != Token::RParen && cur_.type != Token::End) parts.push_back(expr());
            return t_ravel(std::move(parts));
        }
        if (h == "replicate") {
            int64_t k = nat("count");
            return t_replicate(k, expr());
        }
        if (h == "tr") {
            std::vector<int> perm = int_list();
            return t_transpose(perm, expr());
        }
        if (h == "reshape") {
            Shape sh = shape_list();
            return t_reshape(sh, expr());
        }
        if (h == "build1") {
            int64_t k = nat("size");
            expect(Token::LParen, "(lam i body)");
            Token lam = take(Token::Atom, "lam");
            if (lam.text != "lam") err("expected lam", lam);
            Token binder = take(Token::Atom, "binder");
            TermPtr body = expr();
            expect(Token::RParen, "')'");
            return t_build1(k, binder.text, body);
        }
        if (h == "array") return array_literal(head);
        if (h == "var") {
            Token name = take(Token::Atom, "name");
            return t_var(name.text);
        }
        if (h == "share") {
            int64_t id = nat("share id");
            return t_share(id, expr());
        }
        if (h == "onehot") {
            Shape sh = shape_list();
            IxExpr ix = ix_list();
            return t_one_hot(sh, ix, expr());
        }
        if (h == "tuple") {
            std::vector<TermPtr> parts;
            while (cur_.type != Token::RParen && cur_.type != Token::End) parts.push_back(expr());
            return t_tuple(std::move(parts));
        }
        throw ParseError("unknown form " + h, head.line, head.col);
    }

    Lexer lex_;
    Token cur_;
};

}  // namespace

TermPtr parse_term(const std::string& text) {
    Parser p(text);
    TermPtr t = p.expr();
    p.expect_end();
    return t;
}

Program parse_program(const std::string& text) {
    Parser p(text);
    return p.program();
}

}  // namespace adl
