#pragma once

#include <array>
#include <string>
#include <vector>

#include "sketchgame/tape.hpp"
#include "sketchgame/tensor.hpp"

namespace sketchgame {

// Quadratic Bezier in normalized canvas coordinates, every coordinate in (0,1).
struct Stroke {
    double x0, y0, x1, y1, x2, y2;
};

// One sender action: exactly five strokes.
using StrokeBundle = std::array<Stroke, 5>;

struct RasterConfig {
    int width = 64;
    int height = 64;
    double sigma = 1.2;     // stroke radius, px
    double tau = 0.5;       // soft-min temperature, px
    double dist_eps = 0.5;  // distance smoothing radius, px; bounds curvature near samples
    int samples = 24;       // curve sample count
    double margin = 9.0;    // bbox expansion, px; ink beyond it is below 1e-9
};

StrokeBundle bundle_from_flat(const double* a30);
void bundle_to_flat(const StrokeBundle& b, double* a30);

// ink(p) = exp(-(d(p)^2 - dist_eps^2) / (2 sigma^2)), d = softmin-weighted
// smoothed distance to the sampled curve (so on-curve ink is 1). Zero outside
// the expanded control-point bbox.
Tensor rasterize_stroke(const Stroke& s, const RasterConfig& cfg);

// Accumulates d(sum_p upstream(p) * ink(p)) / d(stroke params) into grad6.
void rasterize_stroke_grad(const Stroke& s, const RasterConfig& cfg, const Tensor& upstream,
                           double* grad6);

// Probabilistic OR: out = c + ink - c*ink.
Tensor compose(const Tensor& c, const Tensor& ink);

// Folds compose(rasterize(stroke)) over the bundle; C_{t+1} = G(C_t, a).
Tensor render_action_plain(const Tensor& canvas, const StrokeBundle& a, const RasterConfig& cfg);

// Tape op version: gradient flows to the canvas and to all 30 action scalars.
Var render_action(Tape& tape, Var canvas, Var action30, const RasterConfig& cfg);

Tensor blank_canvas(const RasterConfig& cfg);

// 8-bit P5 export / import (values quantized to round(v*255)).
void write_pgm(const std::string& path, const Tensor& canvas);
Tensor read_pgm(const std::string& path);

// SVG 1.1, viewBox "0 0 1 1", one quadratic path element per stroke.
void write_svg(const std::string& path, const std::vector<StrokeBundle>& actions,
               const RasterConfig& cfg);

}  // namespace sketchgame
