#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace adl {

enum class Kind : uint8_t { Real, Int, Bool };

const char* kind_name(Kind k);

// Multidimensional array shape, outermost dimension first.
struct Shape {
    std::vector<int64_t> dims;

    Shape() = default;
    Shape(std::initializer_list<int64_t> d) : dims(d) {}
    explicit Shape(std::vector<int64_t> d) : dims(std::move(d)) {}

    int rank() const { return (int)dims.size(); }
    int64_t count() const;
    int64_t dim(int i) const { return dims[(size_t)i]; }

    // Shape of the subarray obtained by indexing the first n dimensions.
    Shape drop(int n) const;
    // k ::: this
    Shape cons(int64_t k) const;
    // Last n dimensions.
    Shape suffix(int n) const;

    bool operator==(const Shape& o) const { return dims == o.dims; }
    bool operator!=(const Shape& o) const { return dims != o.dims; }
    std::string str() const;
};

// A (possibly partial) multidimensional index; values may be out of range.
using IndexV = std::vector<int64_t>;

// Rectangular array of one element kind, flat row-major buffer.
class ConcreteArray {
public:
    ConcreteArray() : kind_(Kind::Real) {}

    static ConcreteArray zeros(Kind k, const Shape& sh);
    static ConcreteArray from_reals(const Shape& sh, std::vector<double> data);
    static ConcreteArray from_ints(const Shape& sh, std::vector<int64_t> data);
    static ConcreteArray from_bools(const Shape& sh, std::vector<uint8_t> data);
    static ConcreteArray scalar_real(double v);
    static ConcreteArray scalar_int(int64_t v);
    static ConcreteArray scalar_bool(bool v);
    // [0, 1, ..., k-1]
    static ConcreteArray iota(int64_t k);

    Kind kind() const { return kind_; }
    const Shape& shape() const { return shape_; }
    int rank() const { return shape_.rank(); }
    int64_t count() const { return shape_.count(); }

    const std::vector<double>& reals() const { return f64_; }
    const std::vector<int64_t>& ints() const { return i64_; }
    const std::vector<uint8_t>& bools() const { return b8_; }
    std::vector<double>& reals() { return f64_; }
    std::vector<int64_t>& ints() { return i64_; }
    std::vector<uint8_t>& bools() { return b8_; }

    double real_at(int64_t flat) const { return f64_[(size_t)flat]; }
    int64_t int_at(int64_t flat) const { return i64_[(size_t)flat]; }
    bool bool_at(int64_t flat) const { return b8_[(size_t)flat] != 0; }

    // Rank-0 accessors.
    double scalar_r() const { return f64_[0]; }
    int64_t scalar_i() const { return i64_[0]; }
    bool scalar_b() const { return b8_[0] != 0; }

    bool operator==(const ConcreteArray& o) const;

    std::string str() const;

private:
    Shape shape_;
    Kind kind_;
    std::vector<double> f64_;
    std::vector<int64_t> i64_;
    std::vector<uint8_t> b8_;
};

// Row-major linearisation helpers.
int64_t flat_of_index(const Shape& sh, const IndexV& ix);  // full index, must be in range
bool index_in_range(const Shape& sh, const IndexV& ix);    // prefix index
IndexV index_of_flat(const Shape& sh, int64_t flat);

// Primitive scalar operations, broadcast elementwise by map_op.
enum class Op : uint8_t {
    // binary arithmetic
    Add, Sub, Mul, Div, Mod,
    // binary comparison
    Eq, Ne, Lt, Le, Gt, Ge,
    // unary
    Neg, Sin, Cos, Exp, Log, Sqrt, Tanh,
};

bool op_is_unary(Op op);
bool op_is_comparison(Op op);
const char* op_name(Op op);
bool op_from_name(const std::string& s, Op& out);

// --- bulk operations -------------------------------------------------------

// Subarray at a partial index; out-of-range reads give zeros/false.
ConcreteArray index(const ConcreteArray& a, const IndexV& ix);

// out[j1..jm1, rest] = a[f(j1..jm1), rest]; f maps an m1-index to an m2-index.
ConcreteArray gather(const Shape& sh, const ConcreteArray& a, int m1,
                     const std::function<IndexV(const IndexV&)>& f);

// Starts from zeros of shape sh; adds a[p, rest] at out[f(p), rest].
// Writes with out-of-range targets are dropped.
ConcreteArray scatter(const Shape& sh, const ConcreteArray& a, int m1,
                      const std::function<IndexV(const IndexV&)>& f);

// Elementwise sum along the outermost dimension, in ascending index order.
ConcreteArray sum_outer(const ConcreteArray& a);

ConcreteArray replicate(int64_t k, const ConcreteArray& a);

// Permutes the first perm.size() dimensions: result dim l = source dim perm[l].
ConcreteArray transpose(const std::vector<int>& perm, const ConcreteArray& a);

ConcreteArray reshape(const Shape& sh, const ConcreteArray& a);

// Stacks equal-shaped arrays along a new outermost dimension.
ConcreteArray from_subarrays(const std::vector<ConcreteArray>& parts);

// Zeros of shape sh with v placed at ix; out-of-range ix gives all zeros.
ConcreteArray one_hot(const Shape& sh, const IndexV& ix, const ConcreteArray& v);

ConcreteArray map_op(Op op, const std::vector<ConcreteArray>& args);

std::vector<int> inverse_permutation(const std::vector<int>& perm);

// Flooring integer division/modulo; division by zero yields 0.
int64_t floordiv(int64_t a, int64_t b);
int64_t floormod(int64_t a, int64_t b);

double dot(const ConcreteArray& a, const ConcreteArray& b);

}  // namespace adl
