#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "adl/term.hpp"

namespace adl {

// Identifies one real-kind input of the differentiated program, together with
// a value-level shape witness for the keyed stores of the reverse pass.
struct DVarName {
    int id = 0;
    Shape shape;
};

using DeltaId = long;

// Carriers: the trace is generic over whether embedded tensors are concrete
// arrays (interpreted reverse pass) or Terms (symbolic reverse pass).
struct ConcreteCarrier {
    using ScaleArr = ConcreteArray;
    using Ix = IndexV;
    struct Fn {
        int m1 = 0;  // binder count of the index mapping
        std::function<IndexV(const IndexV&)> apply;
    };
};

struct SymbolicCarrier {
    using ScaleArr = TermPtr;
    using Ix = IxExpr;
    using Fn = IxFn;
};

enum class DeltaTag : uint8_t {
    Zero, Input, Add, Scale, Share,
    IndexD, SumOuterD, GatherD, ScatterD, LitArray,
    ReplicateD, TransposeD, ReshapeD,
};

template <class Car>
struct DeltaNode;
template <class Car>
using DeltaPtr = std::shared_ptr<const DeltaNode<Car>>;

template <class Car>
struct DeltaNode {
    DeltaTag tag;
    Shape shape;  // result shape, cached at construction

    DVarName input;                     // Input
    DeltaPtr<Car> d1, d2;               // children
    std::vector<DeltaPtr<Car>> parts;   // LitArray
    typename Car::ScaleArr scale{};     // Scale
    DeltaId id = 0;                     // Share
    typename Car::Ix ix{};              // IndexD
    typename Car::Fn fn{};              // GatherD/ScatterD
    std::vector<int> perm;              // TransposeD

    explicit DeltaNode(DeltaTag t) : tag(t) {}
};

template <class Car>
DeltaPtr<Car> d_zero(Shape sh) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::Zero);
    n->shape = std::move(sh);
    return n;
}

template <class Car>
DeltaPtr<Car> d_input(DVarName v) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::Input);
    n->shape = v.shape;
    n->input = std::move(v);
    return n;
}

template <class Car>
DeltaPtr<Car> d_add(DeltaPtr<Car> a, DeltaPtr<Car> b) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::Add);
    n->shape = a->shape;
    n->d1 = std::move(a);
    n->d2 = std::move(b);
    return n;
}

template <class Car>
DeltaPtr<Car> d_scale(typename Car::ScaleArr arr, DeltaPtr<Car> d) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::Scale);
    n->shape = d->shape;
    n->scale = std::move(arr);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_share(DeltaId id, DeltaPtr<Car> d) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::Share);
    n->shape = d->shape;
    n->id = id;
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_index(DeltaPtr<Car> d, typename Car::Ix ix, int m) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::IndexD);
    n->shape = d->shape.drop(m);
    n->ix = std::move(ix);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_sum_outer(DeltaPtr<Car> d) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::SumOuterD);
    n->shape = d->shape.drop(1);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_gather(Shape out_sh, DeltaPtr<Car> d, typename Car::Fn fn) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::GatherD);
    n->shape = std::move(out_sh);
    n->fn = std::move(fn);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_scatter(Shape out_sh, DeltaPtr<Car> d, typename Car::Fn fn) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::ScatterD);
    n->shape = std::move(out_sh);
    n->fn = std::move(fn);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_lit_array(std::vector<DeltaPtr<Car>> parts) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::LitArray);
    n->shape = parts.at(0)->shape.cons((int64_t)parts.size());
    n->parts = std::move(parts);
    return n;
}

template <class Car>
DeltaPtr<Car> d_replicate(int64_t k, DeltaPtr<Car> d) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::ReplicateD);
    n->shape = d->shape.cons(k);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_transpose(std::vector<int> perm, DeltaPtr<Car> d) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::TransposeD);
    Shape sh = d->shape;
    for (size_t l = 0; l < perm.size(); ++l) sh.dims[l] = d->shape.dim(perm[l]);
    n->shape = std::move(sh);
    n->perm = std::move(perm);
    n->d1 = std::move(d);
    return n;
}

template <class Car>
DeltaPtr<Car> d_reshape(Shape sh, DeltaPtr<Car> d) {
    auto n = std::make_shared<DeltaNode<Car>>(DeltaTag::ReshapeD);
    n->shape = std::move(sh);
    n->d1 = std::move(d);
    return n;
}

// O(1): shapes are cached at construction.
template <class Car>
const Shape& shape_delta(const DeltaPtr<Car>& d) {
    return d->shape;
}

// --- structural scans -------------------------------------------------------

struct DeltaScan {
    bool ok = true;
    std::vector<std::string> violations;
    int64_t node_count = 0;  // Share bodies counted once per id
};

namespace detail {

template <class Car>
void delta_scan_walk(const DeltaPtr<Car>& d, DeltaScan& s,
                     std::map<DeltaId, const DeltaNode<Car>*>& seen, DeltaId bound) {
    ++s.node_count;
    if (d->tag == DeltaTag::Share) {
        if (d->id >= bound && bound >= 0) {
            s.ok = false;
            s.violations.push_back("Share id " + std::to_string(d->id) +
                                   " not strictly smaller than enclosing id " +
                                   std::to_string(bound));
        }
        auto it = seen.find(d->id);
        if (it != seen.end()) {
            if (it->second != d.get()) {
                s.ok = false;
                s.violations.push_back("Share id " + std::to_string(d->id) +
                                       " wraps two distinct nodes");
            }
            --s.node_count;  // body already counted
            return;
        }
        seen.emplace(d->id, d.get());
        delta_scan_walk(d->d1, s, seen, d->id);
        return;
    }
    if (d->d1) delta_scan_walk(d->d1, s, seen, bound);
    if (d->d2) delta_scan_walk(d->d2, s, seen, bound);
    for (auto& p : d->parts) delta_scan_walk(p, s, seen, bound);
}

}  // namespace detail

// Verifies the sharing discipline: inside Share(i, d) all ids are strictly
// smaller than i (Inv-1) and equal ids wrap the identical node (Inv-2).
template <class Car>
DeltaScan scan_delta(const DeltaPtr<Car>& d) {
    DeltaScan s;
    std::map<DeltaId, const DeltaNode<Car>*> seen;
    detail::delta_scan_walk<Car>(d, s, seen, -1);
    return s;
}

template <class Car>
int64_t delta_node_count(const DeltaPtr<Car>& d) {
    return scan_delta(d).node_count;
}

// Debug printer for traces; symbolic payloads are printed as terms.
template <class Car>
void print_delta_walk(const DeltaPtr<Car>& d, std::ostringstream& os) {
    switch (d->tag) {
        case DeltaTag::Zero: os << "Zero"; return;
        case DeltaTag::Input: os << "Input " << d->input.id; return;
        case DeltaTag::Add:
            os << "(Add ";
            print_delta_walk(d->d1, os);
            os << " ";
            print_delta_walk(d->d2, os);
            os << ")";
            return;
        case DeltaTag::Scale:
            os << "(Scale ";
            if constexpr (std::is_same_v<Car, SymbolicCarrier>)
                os << print_term(d->scale);
            else
                os << "<arr " << d->scale.shape().str() << ">";
            os << " ";
            print_delta_walk(d->d1, os);
            os << ")";
            return;
        case DeltaTag::Share:
            os << "(Share " << d->id << " ";
            print_delta_walk(d->d1, os);
            os << ")";
            return;
        case DeltaTag::IndexD:
            os << "(Index ";
            print_delta_walk(d->d1, os);
            os << " <ix>)";
            return;
        case DeltaTag::SumOuterD:
            os << "(SumOuter ";
            print_delta_walk(d->d1, os);
            os << ")";
            return;
        case DeltaTag::GatherD:
        case DeltaTag::ScatterD:
            os << (d->tag == DeltaTag::GatherD ? "(Gather " : "(Scatter ");
            print_delta_walk(d->d1, os);
            os << " <fn>)";
            return;
        case DeltaTag::LitArray:
            os << "(LitArray";
            for (auto& p : d->parts) {
                os << " ";
                print_delta_walk(p, os);
            }
            os << ")";
            return;
        case DeltaTag::ReplicateD:
            os << "(Replicate ";
            print_delta_walk(d->d1, os);
            os << ")";
            return;
        case DeltaTag::TransposeD:
            os << "(Transpose ";
            print_delta_walk(d->d1, os);
            os << ")";
            return;
        case DeltaTag::ReshapeD:
            os << "(Reshape " << d->shape.str() << " ";
            print_delta_walk(d->d1, os);
            os << ")";
            return;
    }
}

template <class Car>
std::string print_delta(const DeltaPtr<Car>& d) {
    std::ostringstream os;
    print_delta_walk(d, os);
    return os.str();
}

using ConcDelta = DeltaPtr<ConcreteCarrier>;
using SymDelta = DeltaPtr<SymbolicCarrier>;

}  // namespace adl
