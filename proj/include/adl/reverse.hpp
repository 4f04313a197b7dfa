#pragma once

#include <cassert>
#include <map>
#include <vector>

#include "adl/check.hpp"
#include "adl/delta.hpp"
#include "adl/interp.hpp"

namespace adl {

// Reverse-pass state: sparse gradient, pending delta fragments, accumulated
// cotangents. Keys carry their shape as a value-level witness.
template <class Policy>
struct EState {
    using Cot = typename Policy::Cot;

    std::map<int, Cot> grad;          // DVarName id -> cotangent
    std::map<int, Shape> grad_shape;  // shape witness per gradient key
    std::map<DeltaId, DeltaPtr<typename Policy::Car>> dfrag;
    std::map<DeltaId, Cot> accum;
    std::map<DeltaId, Shape> accum_shape;

    // instrumentation
    long eval_visits = 0;
    std::vector<DeltaId> dequeued;
};

// One evaluation step of the reverse pass: transposes the forward derivative
// described by d and pushes the cotangent c into the state. Stops at Share
// nodes, deferring them to backprop.
template <class Policy>
void eval_rev(Policy& pol, const typename Policy::Cot& c,
              const DeltaPtr<typename Policy::Car>& d, EState<Policy>& s) {
    ++s.eval_visits;
    switch (d->tag) {
        case DeltaTag::Zero:
            return;
        case DeltaTag::Input: {
            auto it = s.grad.find(d->input.id);
            if (it == s.grad.end()) {
                s.grad.emplace(d->input.id, c);
                s.grad_shape.emplace(d->input.id, d->input.shape);
            } else {
                assert(s.grad_shape[d->input.id] == d->input.shape);
                it->second = pol.add(c, it->second);  // newest contribution on the left
            }
            return;
        }
        case DeltaTag::Add: {
            auto cs = pol.share_dup(c);
            eval_rev(pol, cs, d->d1, s);
            eval_rev(pol, cs, d->d2, s);
            return;
        }
        case DeltaTag::Scale:
            eval_rev(pol, pol.scale(d->scale, c), d->d1, s);
            return;
        case DeltaTag::Share: {
            auto it = s.accum.find(d->id);
            if (it == s.accum.end()) {
                s.accum.emplace(d->id, c);
                s.accum_shape.emplace(d->id, d->shape);
                s.dfrag.emplace(d->id, d->d1);
            } else {
                assert(s.accum_shape[d->id] == d->shape);
                it->second = pol.add(c, it->second);
            }
            return;
        }
        case DeltaTag::IndexD:
            eval_rev(pol, pol.one_hot_(d->d1->shape, d->ix, c), d->d1, s);
            return;
        case DeltaTag::SumOuterD:
            eval_rev(pol, pol.replicate_(d->d1->shape.dim(0), c), d->d1, s);
            return;
        case DeltaTag::GatherD:
            eval_rev(pol, pol.scatter_(d->d1->shape, c, d->fn), d->d1, s);
            return;
        case DeltaTag::ScatterD:
            eval_rev(pol, pol.gather_(d->d1->shape, c, d->fn), d->d1, s);
            return;
        case DeltaTag::LitArray: {
            auto cs = pol.share_dup(c);
            for (int64_t j = 0; j < (int64_t)d->parts.size(); ++j)
                eval_rev(pol, pol.index_slice(cs, j), d->parts[(size_t)j], s);
            return;
        }
        case DeltaTag::ReplicateD:
            eval_rev(pol, pol.sum_outer_(c), d->d1, s);
            return;
        case DeltaTag::TransposeD:
            eval_rev(pol, pol.transpose_(inverse_permutation(d->perm), c), d->d1, s);
            return;
        case DeltaTag::ReshapeD:
            eval_rev(pol, pol.reshape_(d->d1->shape, c), d->d1, s);
            return;
    }
}

// Repeatedly takes the maximum pending id and evaluates its fragment with the
// accumulated cotangent, until nothing is pending. Ids are processed in
// strictly decreasing order.
template <class Policy>
void backprop(Policy& pol, EState<Policy>& s) {
    while (!s.accum.empty()) {
        auto it = std::prev(s.accum.end());
        DeltaId i = it->first;
        typename Policy::Cot c = it->second;
        s.accum.erase(it);
        auto df = s.dfrag.find(i);
        assert(df != s.dfrag.end() && "pending id without a fragment");
        DeltaPtr<typename Policy::Car> d = df->second;
        s.dfrag.erase(df);
        assert(s.dequeued.empty() || s.dequeued.back() > i);
        s.dequeued.push_back(i);
        eval_rev(pol, c, d, s);
    }
}

template <class Policy>
struct ReverseResult {
    std::map<int, typename Policy::Cot> grad;
    std::map<int, Shape> grad_shape;
    long eval_visits = 0;
    std::vector<DeltaId> dequeued;
};

template <class Policy>
ReverseResult<Policy> reverse_pass(Policy& pol, const typename Policy::Cot& c,
                                   const DeltaPtr<typename Policy::Car>& d) {
    EState<Policy> s;
    eval_rev(pol, c, d, s);
    backprop(pol, s);
    return ReverseResult<Policy>{std::move(s.grad), std::move(s.grad_shape), s.eval_visits,
                                 std::move(s.dequeued)};
}

// --- concrete instantiation --------------------------------------------------

struct ConcretePolicy {
    using Car = ConcreteCarrier;
    using Cot = ConcreteArray;

    Cot add(const Cot& a, const Cot& b) { return map_op(Op::Add, {a, b}); }
    Cot scale(const Car::ScaleArr& arr, const Cot& c) { return map_op(Op::Mul, {arr, c}); }
    Cot share_dup(const Cot& c) { return c; }
    Cot one_hot_(const Shape& sh, const Car::Ix& ix, const Cot& c) { return one_hot(sh, ix, c); }
    Cot replicate_(int64_t k, const Cot& c) { return replicate(k, c); }
    Cot sum_outer_(const Cot& c) { return sum_outer(c); }
    Cot scatter_(const Shape& sh, const Cot& c, const Car::Fn& fn) {
        return scatter(sh, c, fn.m1, fn.apply);
    }
    Cot gather_(const Shape& sh, const Cot& c, const Car::Fn& fn) {
        return gather(sh, c, fn.m1, fn.apply);
    }
    Cot index_slice(const Cot& c, int64_t j) { return index(c, {j}); }
    Cot transpose_(const std::vector<int>& perm, const Cot& c) { return transpose(perm, c); }
    Cot reshape_(const Shape& sh, const Cot& c) { return reshape(sh, c); }
};

// Forward pass at the concrete carrier: evaluates the (BOT-normal, checked)
// term while building the Delta trace of its total derivative.
struct ConcForward {
    ConcreteArray value;
    ConcDelta delta;  // derivative of the rank-0 real result
    std::vector<std::pair<std::string, DVarName>> real_inputs;  // declaration order
};

ConcForward forward_concrete(const TermPtr& t, const std::vector<Param>& params,
                             const ValueEnv& inputs, IdGen& ids);

struct GradResult {
    ConcreteArray value;
    std::map<std::string, ConcreteArray> grad;  // one entry per real-kind param
    long eval_visits = 0;
    std::vector<DeltaId> dequeued;
    int64_t delta_nodes = 0;
};

// Concrete-mode gradient: forward dualization, reverse pass, then zero-filling
// for real params that received no contribution. t must contain no build1.
GradResult grad_concrete(const TermPtr& t, const std::vector<Param>& params,
                         const ValueEnv& inputs, const ConcreteArray& ctg);

}  // namespace adl
