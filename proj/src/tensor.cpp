#include "adl/tensor.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace adl {

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Real: return "f64";
        case Kind::Int: return "i64";
        case Kind::Bool: return "bool";
    }
    return "?";
}

int64_t Shape::count() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
}

Shape Shape::drop(int n) const {
    assert(n <= rank());
    return Shape(std::vector<int64_t>(dims.begin() + n, dims.end()));
}

Shape Shape::cons(int64_t k) const {
    Shape r;
    r.dims.reserve(dims.size() + 1);
    r.dims.push_back(k);
    r.dims.insert(r.dims.end(), dims.begin(), dims.end());
    return r;
}

Shape Shape::suffix(int n) const {
    assert(n <= rank());
    return Shape(std::vector<int64_t>(dims.end() - n, dims.end()));
}

std::string Shape::str() const {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

ConcreteArray ConcreteArray::zeros(Kind k, const Shape& sh) {
    ConcreteArray a;
    a.kind_ = k;
    a.shape_ = sh;
    size_t n = (size_t)sh.count();
    switch (k) {
        case Kind::Real: a.f64_.assign(n, 0.0); break;
        case Kind::Int: a.i64_.assign(n, 0); break;
        case Kind::Bool: a.b8_.assign(n, 0); break;
    }
    return a;
}

ConcreteArray ConcreteArray::from_reals(const Shape& sh, std::vector<double> data) {
    assert((int64_t)data.size() == sh.count());
    ConcreteArray a;
    a.kind_ = Kind::Real;
    a.shape_ = sh;
    a.f64_ = std::move(data);
    return a;
}

ConcreteArray ConcreteArray::from_ints(const Shape& sh, std::vector<int64_t> data) {
    assert((int64_t)data.size() == sh.count());
    ConcreteArray a;
    a.kind_ = Kind::Int;
    a.shape_ = sh;
    a.i64_ = std::move(data);
    return a;
}

ConcreteArray ConcreteArray::from_bools(const Shape& sh, std::vector<uint8_t> data) {
    assert((int64_t)data.size() == sh.count());
    ConcreteArray a;
    a.kind_ = Kind::Bool;
    a.shape_ = sh;
    a.b8_ = std::move(data);
    return a;
}

ConcreteArray ConcreteArray::scalar_real(double v) { return from_reals(Shape{}, {v}); }
ConcreteArray ConcreteArray::scalar_int(int64_t v) { return from_ints(Shape{}, {v}); }
ConcreteArray ConcreteArray::scalar_bool(bool v) { return from_bools(Shape{}, {(uint8_t)(v ? 1 : 0)}); }

ConcreteArray ConcreteArray::iota(int64_t k) {
    std::vector<int64_t> d((size_t)k);
    for (int64_t i = 0; i < k; ++i) d[(size_t)i] = i;
    return from_ints(Shape{k}, std::move(d));
}

bool ConcreteArray::operator==(const ConcreteArray& o) const {
    return kind_ == o.kind_ && shape_ == o.shape_ && f64_ == o.f64_ && i64_ == o.i64_ && b8_ == o.b8_;
}

std::string ConcreteArray::str() const {
    std::ostringstream os;
    os << "array " << kind_name(kind_) << " " << shape_.str() << " [";
    int64_t n = count();
    for (int64_t i = 0; i < n; ++i) {
        if (i) os << ",";
        switch (kind_) {
            case Kind::Real: {
                char buf[40];
                snprintf(buf, sizeof buf, "%.17g", f64_[(size_t)i]);
                os << buf;
                break;
            }
            case Kind::Int: os << i64_[(size_t)i]; break;
            case Kind::Bool: os << (b8_[(size_t)i] ? 1 : 0); break;
        }
    }
    os << "]";
    return os.str();
}

int64_t flat_of_index(const Shape& sh, const IndexV& ix) {
    assert((int)ix.size() == sh.rank());
    int64_t flat = 0;
    for (int i = 0; i < sh.rank(); ++i) flat = flat * sh.dim(i) + ix[(size_t)i];
    return flat;
}

bool index_in_range(const Shape& sh, const IndexV& ix) {
    if ((int)ix.size() > sh.rank()) return false;
    for (size_t i = 0; i < ix.size(); ++i)
        if (ix[i] < 0 || ix[i] >= sh.dim((int)i)) return false;
    return true;
}

IndexV index_of_flat(const Shape& sh, int64_t flat) {
    IndexV ix((size_t)sh.rank());
    for (int i = sh.rank() - 1; i >= 0; --i) {
        int64_t d = sh.dim(i);
        ix[(size_t)i] = flat % d;
        flat /= d;
    }
    return ix;
}

bool op_is_unary(Op op) {
    switch (op) {
        case Op::Neg:
        case Op::Sin:
        case Op::Cos:
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt:
        case Op::Tanh: return true;
        default: return false;
    }
}

bool op_is_comparison(Op op) {
    switch (op) {
        case Op::Eq:
        case Op::Ne:
        case Op::Lt:
        case Op::Le:
        case Op::Gt:
        case Op::Ge: return true;
        default: return false;
    }
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        case Op::Mod: return "mod";
        case Op::Eq: return "==";
        case Op::Ne: return "!=";
        case Op::Lt: return "<";
        case Op::Le: return "<=";
        case Op::Gt: return ">";
        case Op::Ge: return ">=";
        case Op::Neg: return "neg";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Tanh: return "tanh";
    }
    return "?";
}

bool op_from_name(const std::string& s, Op& out) {
    static const std::pair<const char*, Op> table[] = {
        {"+", Op::Add},   {"-", Op::Sub},    {"*", Op::Mul},   {"/", Op::Div},
        {"div", Op::Div}, {"mod", Op::Mod},  {"==", Op::Eq},   {"!=", Op::Ne},
        {"<", Op::Lt},    {"<=", Op::Le},    {">", Op::Gt},    {">=", Op::Ge},
        {"neg", Op::Neg}, {"sin", Op::Sin},  {"cos", Op::Cos}, {"exp", Op::Exp},
        {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"tanh", Op::Tanh}, {"mul", Op::Mul},
    };
    for (auto& [name, op] : table) {
        if (s == name) {
            out = op;
            return true;
        }
    }
    return false;
}

int64_t floordiv(int64_t a, int64_t b) {
    if (b == 0) return 0;
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int64_t floormod(int64_t a, int64_t b) {
    if (b == 0) return 0;
    return a - b * floordiv(a, b);
}

ConcreteArray index(const ConcreteArray& a, const IndexV& ix) {
    assert((int)ix.size() <= a.rank());
    int m = (int)ix.size();
    Shape res = a.shape().drop(m);
    if (!index_in_range(a.shape(), ix)) return ConcreteArray::zeros(a.kind(), res);
    int64_t base = 0;
    for (int i = 0; i < m; ++i) base = base * a.shape().dim(i) + ix[(size_t)i];
    int64_t n = res.count();
    base *= n;
    switch (a.kind()) {
        case Kind::Real: {
            std::vector<double> d(a.reals().begin() + base, a.reals().begin() + base + n);
            return ConcreteArray::from_reals(res, std::move(d));
        }
        case Kind::Int: {
            std::vector<int64_t> d(a.ints().begin() + base, a.ints().begin() + base + n);
            return ConcreteArray::from_ints(res, std::move(d));
        }
        case Kind::Bool: {
            std::vector<uint8_t> d(a.bools().begin() + base, a.bools().begin() + base + n);
            return ConcreteArray::from_bools(res, std::move(d));
        }
    }
    return ConcreteArray();
}

namespace {

// Copies one element from src[sflat] to dst[dflat].
inline void copy_elem(ConcreteArray& dst, int64_t dflat, const ConcreteArray& src, int64_t sflat) {
    switch (dst.kind()) {
        case Kind::Real: dst.reals()[(size_t)dflat] = src.reals()[(size_t)sflat]; break;
        case Kind::Int: dst.ints()[(size_t)dflat] = src.ints()[(size_t)sflat]; break;
        case Kind::Bool: dst.bools()[(size_t)dflat] = src.bools()[(size_t)sflat]; break;
    }
}

inline void add_elem(ConcreteArray& dst, int64_t dflat, const ConcreteArray& src, int64_t sflat) {
    switch (dst.kind()) {
        case Kind::Real: dst.reals()[(size_t)dflat] += src.reals()[(size_t)sflat]; break;
        case Kind::Int: dst.ints()[(size_t)dflat] += src.ints()[(size_t)sflat]; break;
        case Kind::Bool: assert(false && "scatter on bools"); break;
    }
}

}  // namespace

ConcreteArray gather(const Shape& sh, const ConcreteArray& a, int m1,
                     const std::function<IndexV(const IndexV&)>& f) {
    assert(m1 <= sh.rank());
    int rest = sh.rank() - m1;
    int m2 = a.rank() - rest;
    assert(m2 >= 0);
    assert(sh.suffix(rest) == a.shape().suffix(rest));
    ConcreteArray out = ConcreteArray::zeros(a.kind(), sh);
    int64_t lead_n = 1;
    for (int i = 0; i < m1; ++i) lead_n *= sh.dim(i);
    int64_t rest_n = sh.drop(m1).count();
    Shape lead_sh(std::vector<int64_t>(sh.dims.begin(), sh.dims.begin() + m1));
    for (int64_t li = 0; li < lead_n; ++li) {
        IndexV lead = index_of_flat(lead_sh, li);
        IndexV src = f(lead);
        assert((int)src.size() == m2);
        if (!index_in_range(a.shape(), src)) continue;  // leave zeros
        int64_t sbase = 0;
        for (int i = 0; i < m2; ++i) sbase = sbase * a.shape().dim(i) + src[(size_t)i];
        sbase *= rest_n;
        int64_t dbase = li * rest_n;
        for (int64_t r = 0; r < rest_n; ++r) copy_elem(out, dbase + r, a, sbase + r);
    }
    return out;
}

ConcreteArray scatter(const Shape& sh, const ConcreteArray& a, int m1,
                      const std::function<IndexV(const IndexV&)>& f) {
    assert(m1 <= a.rank());
    assert(a.kind() != Kind::Bool);
    int rest = a.rank() - m1;
    int m2 = sh.rank() - rest;
    assert(m2 >= 0);
    assert(sh.suffix(rest) == a.shape().suffix(rest));
    ConcreteArray out = ConcreteArray::zeros(a.kind(), sh);
    int64_t lead_n = 1;
    for (int i = 0; i < m1; ++i) lead_n *= a.shape().dim(i);
    int64_t rest_n = a.shape().drop(m1).count();
    Shape lead_sh(std::vector<int64_t>(a.shape().dims.begin(), a.shape().dims.begin() + m1));
    for (int64_t li = 0; li < lead_n; ++li) {
        IndexV lead = index_of_flat(lead_sh, li);
        IndexV dst = f(lead);
        assert((int)dst.size() == m2);
        if (!index_in_range(sh, dst)) continue;  // dropped
        int64_t dbase = 0;
        for (int i = 0; i < m2; ++i) dbase = dbase * sh.dim(i) + dst[(size_t)i];
        dbase *= rest_n;
        int64_t sbase = li * rest_n;
        for (int64_t r = 0; r < rest_n; ++r) add_elem(out, dbase + r, a, sbase + r);
    }
    return out;
}

ConcreteArray sum_outer(const ConcreteArray& a) {
    assert(a.rank() >= 1);
    assert(a.kind() != Kind::Bool);
    int64_t k = a.shape().dim(0);
    Shape res = a.shape().drop(1);
    int64_t n = res.count();
    ConcreteArray out = ConcreteArray::zeros(a.kind(), res);
    for (int64_t i = 0; i < k; ++i)
        for (int64_t r = 0; r < n; ++r) add_elem(out, r, a, i * n + r);
    return out;
}

ConcreteArray replicate(int64_t k, const ConcreteArray& a) {
    assert(k >= 0);
    ConcreteArray out = ConcreteArray::zeros(a.kind(), a.shape().cons(k));
    int64_t n = a.count();
    for (int64_t i = 0; i < k; ++i)
        for (int64_t r = 0; r < n; ++r) copy_elem(out, i * n + r, a, r);
    return out;
}

ConcreteArray transpose(const std::vector<int>& perm, const ConcreteArray& a) {
    int m = (int)perm.size();
    assert(m <= a.rank());
    Shape res = a.shape();
    for (int l = 0; l < m; ++l) res.dims[(size_t)l] = a.shape().dim(perm[(size_t)l]);
    ConcreteArray out = ConcreteArray::zeros(a.kind(), res);
    int64_t total = res.count();
    for (int64_t flat = 0; flat < total; ++flat) {
        IndexV oix = index_of_flat(res, flat);
        IndexV six = oix;
        for (int l = 0; l < m; ++l) six[(size_t)perm[(size_t)l]] = oix[(size_t)l];
        copy_elem(out, flat, a, flat_of_index(a.shape(), six));
    }
    return out;
}

ConcreteArray reshape(const Shape& sh, const ConcreteArray& a) {
    assert(sh.count() == a.count());
    ConcreteArray out = a;
    switch (a.kind()) {
        case Kind::Real: return ConcreteArray::from_reals(sh, a.reals());
        case Kind::Int: return ConcreteArray::from_ints(sh, a.ints());
        case Kind::Bool: return ConcreteArray::from_bools(sh, a.bools());
    }
    return out;
}

ConcreteArray from_subarrays(const std::vector<ConcreteArray>& parts) {
    assert(!parts.empty());
    const Shape& psh = parts[0].shape();
    ConcreteArray out = ConcreteArray::zeros(parts[0].kind(), psh.cons((int64_t)parts.size()));
    int64_t n = psh.count();
    for (size_t i = 0; i < parts.size(); ++i) {
        assert(parts[i].shape() == psh && parts[i].kind() == parts[0].kind());
        for (int64_t r = 0; r < n; ++r) copy_elem(out, (int64_t)i * n + r, parts[i], r);
    }
    return out;
}

ConcreteArray one_hot(const Shape& sh, const IndexV& ix, const ConcreteArray& v) {
    int m = (int)ix.size();
    assert(m <= sh.rank());
    assert(v.shape() == sh.drop(m));
    ConcreteArray out = ConcreteArray::zeros(v.kind(), sh);
    if (!index_in_range(sh, ix)) return out;
    int64_t base = 0;
    for (int i = 0; i < m; ++i) base = base * sh.dim(i) + ix[(size_t)i];
    int64_t n = v.count();
    base *= n;
    for (int64_t r = 0; r < n; ++r) copy_elem(out, base + r, v, r);
    return out;
}

namespace {

double real_binop(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;  // IEEE-754 semantics, including b == 0
        default: assert(false); return 0;
    }
}

int64_t int_binop(Op op, int64_t a, int64_t b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return floordiv(a, b);
        case Op::Mod: return floormod(a, b);
        default: assert(false); return 0;
    }
}

double real_unop(Op op, double a) {
    switch (op) {
        case Op::Neg: return -a;
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Exp: return std::exp(a);
        case Op::Log: return std::log(a);
        case Op::Sqrt: return std::sqrt(a);
        case Op::Tanh: return std::tanh(a);
        default: assert(false); return 0;
    }
}

template <class T>
bool compare(Op op, T a, T b) {
    switch (op) {
        case Op::Eq: return a == b;
        case Op::Ne: return a != b;
        case Op::Lt: return a < b;
        case Op::Le: return a <= b;
        case Op::Gt: return a > b;
        case Op::Ge: return a >= b;
        default: assert(false); return false;
    }
}

}  // namespace

ConcreteArray map_op(Op op, const std::vector<ConcreteArray>& args) {
    assert(!args.empty());
    const ConcreteArray& a0 = args[0];
    for (size_t ai = 1; ai < args.size(); ++ai) {
        assert(args[ai].shape() == a0.shape());
        assert(args[ai].kind() == a0.kind());
        (void)ai;
    }
    int64_t n = a0.count();
    if (op_is_unary(op)) {
        assert(args.size() == 1);
        if (a0.kind() == Kind::Real) {
            std::vector<double> d((size_t)n);
            for (int64_t i = 0; i < n; ++i) d[(size_t)i] = real_unop(op, a0.real_at(i));
            return ConcreteArray::from_reals(a0.shape(), std::move(d));
        }
        assert(op == Op::Neg && a0.kind() == Kind::Int);
        std::vector<int64_t> d((size_t)n);
        for (int64_t i = 0; i < n; ++i) d[(size_t)i] = -a0.int_at(i);
        return ConcreteArray::from_ints(a0.shape(), std::move(d));
    }
    assert(args.size() == 2);
    const ConcreteArray& a1 = args[1];
    if (op_is_comparison(op)) {
        std::vector<uint8_t> d((size_t)n);
        for (int64_t i = 0; i < n; ++i) {
            bool r = false;
            switch (a0.kind()) {
                case Kind::Real: r = compare<double>(op, a0.real_at(i), a1.real_at(i)); break;
                case Kind::Int: r = compare<int64_t>(op, a0.int_at(i), a1.int_at(i)); break;
                case Kind::Bool: r = compare<uint8_t>(op, a0.bools()[(size_t)i], a1.bools()[(size_t)i]); break;
            }
            d[(size_t)i] = (uint8_t)(r ? 1 : 0);
        }
        return ConcreteArray::from_bools(a0.shape(), std::move(d));
    }
    if (a0.kind() == Kind::Real) {
        std::vector<double> d((size_t)n);
        for (int64_t i = 0; i < n; ++i) d[(size_t)i] = real_binop(op, a0.real_at(i), a1.real_at(i));
        return ConcreteArray::from_reals(a0.shape(), std::move(d));
    }
    assert(a0.kind() == Kind::Int);
    std::vector<int64_t> d((size_t)n);
    for (int64_t i = 0; i < n; ++i) d[(size_t)i] = int_binop(op, a0.int_at(i), a1.int_at(i));
    return ConcreteArray::from_ints(a0.shape(), std::move(d));
}

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[(size_t)perm[i]] = (int)i;
    return inv;
}

double dot(const ConcreteArray& a, const ConcreteArray& b) {
    assert(a.shape() == b.shape() && a.kind() == Kind::Real && b.kind() == Kind::Real);
    double s = 0;
    for (int64_t i = 0; i < a.count(); ++i) s += a.real_at(i) * b.real_at(i);
    return s;
}

}  // namespace adl
