#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sketchgame/params.hpp"
#include "sketchgame/tensor.hpp"

namespace sketchgame {

class Tape;

// Handle into a Tape. Valid only for the tape that created it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Tape-based reverse-mode engine. A fresh tape is built per episode/step;
/// creation order is a topological order, so backward is a single reverse
/// sweep. Nodes keep closures that push gradients to their parents.
class Tape {
  public:
    using BackFn = std::function<void(Tape&, int self)>;

    // Constant leaf; gradients are not propagated into it.
    Var constant(Tensor value);
    // Tracked leaf (gradient available after backward).
    Var leaf(Tensor value);
    // Leaf bound to a Param; backward() accumulates into p.grad.
    Var param(Param& p);

    // Generic node for custom ops (renderer lives outside this file).
    Var make_node(Tensor value, std::vector<int> parents, BackFn back);

    // Elementwise.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var tanh_(Var a);
    Var exp_(Var a);
    Var log_(Var a);
    Var square(Var a);
    Var clamp(Var a, double lo, double hi);

    // Linear algebra / nets.
    Var affine(Var W, Var b, Var x);  // W[m,n] x[n] + b[m]
    Var conv2d(Var x, Var W, Var b, int stride, int pad);
    Var softmax(Var logits);
    // Softmax restricted to `allowed` indices; others get probability 0.
    Var masked_softmax(Var logits, const std::vector<int>& allowed);

    // Reductions / shaping.
    Var sum(Var a);
    Var dot(Var a, Var b);
    Var sqnorm(Var a);                        // sum of squares
    Var dot_const(Var a, const Tensor& c);    // scalar
    Var pick(Var a, int idx);                 // scalar element
    Var concat(const std::vector<Var>& xs, std::vector<int> out_shape = {});
    Var reshape(Var a, std::vector<int> shape);

    // Backward from a scalar loss; repeated calls accumulate into Param.grad.
    void backward(Var loss);

    const Tensor& value(Var v) const { return values_[static_cast<size_t>(v.id)]; }
    Tensor& grad(Var v);
    double scalar(Var v) const { return values_[static_cast<size_t>(v.id)].data[0]; }
    bool requires_grad(Var v) const { return requires_[static_cast<size_t>(v.id)]; }
    size_t size() const { return values_.size(); }

  private:
    friend struct TapeAccess;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;           // lazily sized
    std::vector<char> requires_;
    std::vector<BackFn> backs_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::pair<int, Param*>> bound_;  // param leaves

    int push(Tensor value, std::vector<int> parents, BackFn back, bool force_requires = false);
    void ensure_grad(int id);
};

// Helper for custom ops implemented outside tape.cpp.
struct TapeAccess {
    static const Tensor& value(const Tape& t, int id) { return t.values_[static_cast<size_t>(id)]; }
    static Tensor& grad(Tape& t, int id) {
        t.ensure_grad(id);
        return t.grads_[static_cast<size_t>(id)];
    }
    static bool needs_grad(const Tape& t, int id) { return t.requires_[static_cast<size_t>(id)] != 0; }
    static const std::vector<int>& parents(const Tape& t, int id) { return t.parents_[static_cast<size_t>(id)]; }
};

}  // namespace sketchgame
