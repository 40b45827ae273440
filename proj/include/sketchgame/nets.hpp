#pragma once

#include <string>

#include "sketchgame/params.hpp"
#include "sketchgame/tape.hpp"

namespace sketchgame {

// Conv layer bound to parameters in a ParameterSet.
struct Conv2d {
    Param* W = nullptr;
    Param* b = nullptr;
    int stride = 1, pad = 1;

    Conv2d() = default;
    Conv2d(ParameterSet& set, const std::string& name, int in_c, int out_c, int k, int stride,
           int pad, Rng& rng);

    // `frozen` bypasses param binding so no gradient reaches the weights.
    Var forward(Tape& t, Var x, bool frozen = false) const;
};

struct Dense {
    Param* W = nullptr;
    Param* b = nullptr;

    Dense() = default;
    Dense(ParameterSet& set, const std::string& name, int in, int out, Rng& rng,
          double init_scale = 1.0);

    Var forward(Tape& t, Var x, bool frozen = false) const;
};

}  // namespace sketchgame
