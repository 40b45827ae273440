#include "sketchgame/nets.hpp"

namespace sketchgame {

Conv2d::Conv2d(ParameterSet& set, const std::string& name, int in_c, int out_c, int k, int stride_,
               int pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
    W = &set.create(name + ".W", {out_c, in_c, k, k});
    b = &set.create(name + ".b", {out_c});
    init_he_normal(W->value, in_c * k * k, rng);
}

Var Conv2d::forward(Tape& t, Var x, bool frozen) const {
    Var w = frozen ? t.constant(W->value) : t.param(*W);
    Var bb = frozen ? t.constant(b->value) : t.param(*b);
    return t.conv2d(x, w, bb, stride, pad);
}

Dense::Dense(ParameterSet& set, const std::string& name, int in, int out, Rng& rng,
             double init_scale) {
    W = &set.create(name + ".W", {out, in});
    b = &set.create(name + ".b", {out});
    init_he_normal(W->value, in, rng);
    if (init_scale != 1.0)
        for (double& v : W->value.data) v *= init_scale;
}

Var Dense::forward(Tape& t, Var x, bool frozen) const {
    Var w = frozen ? t.constant(W->value) : t.param(*W);
    Var bb = frozen ? t.constant(b->value) : t.param(*b);
    return t.affine(w, bb, x);
}

}  // namespace sketchgame
