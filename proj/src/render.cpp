#include "sketchgame/render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sketchgame/errors.hpp"

namespace sketchgame {

StrokeBundle bundle_from_flat(const double* a) {
    StrokeBundle b;
    for (int i = 0; i < 5; ++i)
        b[static_cast<size_t>(i)] = {a[6 * i], a[6 * i + 1], a[6 * i + 2],
                                     a[6 * i + 3], a[6 * i + 4], a[6 * i + 5]};
    return b;
}

void bundle_to_flat(const StrokeBundle& b, double* a) {
    for (int i = 0; i < 5; ++i) {
        const Stroke& s = b[static_cast<size_t>(i)];
        a[6 * i] = s.x0;
        a[6 * i + 1] = s.y0;
        a[6 * i + 2] = s.x1;
        a[6 * i + 3] = s.y1;
        a[6 * i + 4] = s.x2;
        a[6 * i + 5] = s.y2;
    }
}

namespace {

struct CurveSamples {
    // sample positions in pixel units plus Bernstein weights per sample
    std::vector<double> px, py, w0, w1, w2;
    int x_lo, x_hi, y_lo, y_hi;  // inclusive pixel bbox
};

CurveSamples sample_curve(const Stroke& s, const RasterConfig& cfg) {
    CurveSamples cs;
    int K = cfg.samples;
    cs.px.resize(static_cast<size_t>(K));
    cs.py.resize(static_cast<size_t>(K));
    cs.w0.resize(static_cast<size_t>(K));
    cs.w1.resize(static_cast<size_t>(K));
    cs.w2.resize(static_cast<size_t>(K));
    double W = cfg.width, H = cfg.height;
    for (int k = 0; k < K; ++k) {
        double u = K == 1 ? 0.5 : static_cast<double>(k) / (K - 1);
        double b0 = (1 - u) * (1 - u), b1 = 2 * u * (1 - u), b2 = u * u;
        cs.w0[static_cast<size_t>(k)] = b0;
        cs.w1[static_cast<size_t>(k)] = b1;
        cs.w2[static_cast<size_t>(k)] = b2;
        cs.px[static_cast<size_t>(k)] = (b0 * s.x0 + b1 * s.x1 + b2 * s.x2) * W;
        cs.py[static_cast<size_t>(k)] = (b0 * s.y0 + b1 * s.y1 + b2 * s.y2) * H;
    }
    // curve lies in the control-point hull; expand by the ink cutoff margin
    double xmin = std::min({s.x0, s.x1, s.x2}) * W - cfg.margin;
    double xmax = std::max({s.x0, s.x1, s.x2}) * W + cfg.margin;
    double ymin = std::min({s.y0, s.y1, s.y2}) * H - cfg.margin;
    double ymax = std::max({s.y0, s.y1, s.y2}) * H + cfg.margin;
    cs.x_lo = std::max(0, static_cast<int>(std::floor(xmin)));
    cs.x_hi = std::min(cfg.width - 1, static_cast<int>(std::ceil(xmax)));
    cs.y_lo = std::max(0, static_cast<int>(std::floor(ymin)));
    cs.y_hi = std::min(cfg.height - 1, static_cast<int>(std::ceil(ymax)));
    return cs;
}

}  // namespace

Tensor rasterize_stroke(const Stroke& s, const RasterConfig& cfg) {
    Tensor ink({cfg.height, cfg.width});
    CurveSamples cs = sample_curve(s, cfg);
    int K = cfg.samples;
    double inv_tau = 1.0 / cfg.tau;
    double inv_2s2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    double eps2 = cfg.dist_eps * cfg.dist_eps;
    std::vector<double> d(static_cast<size_t>(K));
    for (int y = cs.y_lo; y <= cs.y_hi; ++y) {
        for (int x = cs.x_lo; x <= cs.x_hi; ++x) {
            double dmin = 1e300;
            for (int k = 0; k < K; ++k) {
                double dx = x - cs.px[static_cast<size_t>(k)];
                double dy = y - cs.py[static_cast<size_t>(k)];
                d[static_cast<size_t>(k)] = std::sqrt(dx * dx + dy * dy + eps2);
                dmin = std::min(dmin, d[static_cast<size_t>(k)]);
            }
            double Z = 0.0, num = 0.0;
            for (int k = 0; k < K; ++k) {
                double w = std::exp(-(d[static_cast<size_t>(k)] - dmin) * inv_tau);
                Z += w;
                num += w * d[static_cast<size_t>(k)];
            }
            double dsoft = num / Z;
            // dsoft >= dist_eps, so the shifted exponent keeps ink in (0, 1]
            ink.data[static_cast<size_t>(y) * cfg.width + x] =
                std::exp(-(dsoft * dsoft - eps2) * inv_2s2);
        }
    }
    return ink;
}

void rasterize_stroke_grad(const Stroke& s, const RasterConfig& cfg, const Tensor& upstream,
                           double* grad6) {
    CurveSamples cs = sample_curve(s, cfg);
    int K = cfg.samples;
    double inv_tau = 1.0 / cfg.tau;
    double inv_2s2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    double eps2 = cfg.dist_eps * cfg.dist_eps;
    double W = cfg.width, H = cfg.height;
    std::vector<double> d(static_cast<size_t>(K)), w(static_cast<size_t>(K));
    for (int y = cs.y_lo; y <= cs.y_hi; ++y) {
        for (int x = cs.x_lo; x <= cs.x_hi; ++x) {
            double go = upstream.data[static_cast<size_t>(y) * cfg.width + x];
            if (go == 0.0) continue;
            double dmin = 1e300;
            for (int k = 0; k < K; ++k) {
                double dx = x - cs.px[static_cast<size_t>(k)];
                double dy = y - cs.py[static_cast<size_t>(k)];
                d[static_cast<size_t>(k)] = std::sqrt(dx * dx + dy * dy + eps2);
                dmin = std::min(dmin, d[static_cast<size_t>(k)]);
            }
            double Z = 0.0, num = 0.0;
            for (int k = 0; k < K; ++k) {
                w[static_cast<size_t>(k)] = std::exp(-(d[static_cast<size_t>(k)] - dmin) * inv_tau);
                Z += w[static_cast<size_t>(k)];
                num += w[static_cast<size_t>(k)] * d[static_cast<size_t>(k)];
            }
            double dsoft = num / Z;
            double ink = std::exp(-(dsoft * dsoft - eps2) * inv_2s2);
            // d ink / d dsoft
            double g_dsoft = go * ink * (-2.0 * dsoft * inv_2s2);
            for (int k = 0; k < K; ++k) {
                double wk = w[static_cast<size_t>(k)] / Z;
                // d dsoft / d d_k for the normalized soft-min
                double g_dk = g_dsoft * wk * (1.0 - (d[static_cast<size_t>(k)] - dsoft) * inv_tau);
                if (g_dk == 0.0) continue;
                double dx = x - cs.px[static_cast<size_t>(k)];
                double dy = y - cs.py[static_cast<size_t>(k)];
                double inv_d = 1.0 / d[static_cast<size_t>(k)];
                // d d_k / d B_k = -(p - B_k)/d_k, then chain into control points
                double g_bx = g_dk * (-dx * inv_d) * W;
                double g_by = g_dk * (-dy * inv_d) * H;
                grad6[0] += g_bx * cs.w0[static_cast<size_t>(k)];
                grad6[1] += g_by * cs.w0[static_cast<size_t>(k)];
                grad6[2] += g_bx * cs.w1[static_cast<size_t>(k)];
                grad6[3] += g_by * cs.w1[static_cast<size_t>(k)];
                grad6[4] += g_bx * cs.w2[static_cast<size_t>(k)];
                grad6[5] += g_by * cs.w2[static_cast<size_t>(k)];
            }
        }
    }
}

Tensor compose(const Tensor& c, const Tensor& ink) {
    if (!c.same_shape(ink)) throw ConfigError("compose: shape mismatch");
    Tensor out(c.shape);
    for (int i = 0; i < c.size(); ++i) out[i] = c[i] + ink[i] - c[i] * ink[i];
    return out;
}

Tensor render_action_plain(const Tensor& canvas, const StrokeBundle& a, const RasterConfig& cfg) {
    Tensor c = canvas;
    for (const Stroke& s : a) c = compose(c, rasterize_stroke(s, cfg));
    return c;
}

Var render_action(Tape& tape, Var canvas, Var action30, const RasterConfig& cfg) {
    if (tape.value(action30).size() != 30) throw ConfigError("render_action: action must have 30 scalars");
    StrokeBundle bundle = bundle_from_flat(tape.value(action30).data.data());
    Tensor out = render_action_plain(tape.value(canvas), bundle, cfg);
    int pc = canvas.id, pa = action30.id;
    return tape.make_node(std::move(out), {pc, pa}, [pc, pa, bundle, cfg](Tape& t, int self) {
        const Tensor& g_out = TapeAccess::grad(t, self);
        // recompute intermediate canvases; memory stays flat for long episodes
        std::array<Tensor, 5> inks;
        std::array<Tensor, 5> before;
        Tensor c = TapeAccess::value(t, pc);
        for (int i = 0; i < 5; ++i) {
            before[static_cast<size_t>(i)] = c;
            inks[static_cast<size_t>(i)] = rasterize_stroke(bundle[static_cast<size_t>(i)], cfg);
            c = compose(c, inks[static_cast<size_t>(i)]);
        }
        bool need_c = TapeAccess::needs_grad(t, pc);
        bool need_a = TapeAccess::needs_grad(t, pa);
        Tensor g = g_out;
        double grad30[30] = {0};
        for (int i = 4; i >= 0; --i) {
            const Tensor& cb = before[static_cast<size_t>(i)];
            const Tensor& ink = inks[static_cast<size_t>(i)];
            if (need_a) {
                Tensor g_ink(ink.shape);
                for (int j = 0; j < ink.size(); ++j) g_ink[j] = g[j] * (1.0 - cb[j]);
                rasterize_stroke_grad(bundle[static_cast<size_t>(i)], cfg, g_ink, &grad30[6 * i]);
            }
            for (int j = 0; j < ink.size(); ++j) g[j] *= (1.0 - ink[j]);
        }
        if (need_c) {
            Tensor& gc = TapeAccess::grad(t, pc);
            for (int j = 0; j < g.size(); ++j) gc[j] += g[j];
        }
        if (need_a) {
            Tensor& ga = TapeAccess::grad(t, pa);
            for (int j = 0; j < 30; ++j) ga[j] += grad30[j];
        }
    });
}

Tensor blank_canvas(const RasterConfig& cfg) { return Tensor({cfg.height, cfg.width}); }

void write_pgm(const std::string& path, const Tensor& canvas) {
    if (canvas.shape.size() != 2) throw ConfigError("write_pgm: expected HxW canvas");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "P5\n" << canvas.shape[1] << " " << canvas.shape[0] << "\n255\n";
    for (double v : canvas.data) {
        double q = std::round(std::min(1.0, std::max(0.0, v)) * 255.0);
        os.put(static_cast<char>(static_cast<unsigned char>(q)));
    }
    if (!os) throw IoError("write failed: " + path);
}

Tensor read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw IoError("not a P5 PGM: " + path);
    int w, h, maxv;
    is >> w >> h >> maxv;
    is.get();  // single whitespace after header
    if (maxv != 255) throw IoError("unsupported maxval in " + path);
    Tensor out({h, w});
    for (int i = 0; i < out.size(); ++i) {
        int ch = is.get();
        if (ch < 0) throw IoError("truncated PGM: " + path);
        out[i] = static_cast<double>(ch) / 255.0;
    }
    return out;
}

void write_svg(const std::string& path, const std::vector<StrokeBundle>& actions,
               const RasterConfig& cfg) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path);
    double stroke_w = 2.0 * cfg.sigma / cfg.width;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 1 1\">\n";
    os << "<rect width=\"1\" height=\"1\" fill=\"white\"/>\n";
    char buf[256];
    for (const StrokeBundle& a : actions) {
        for (const Stroke& s : a) {
            std::snprintf(buf, sizeof(buf),
                          "<path d=\"M %.6f %.6f Q %.6f %.6f %.6f %.6f\" stroke=\"black\" "
                          "stroke-width=\"%.6f\" fill=\"none\" stroke-linecap=\"round\"/>\n",
                          s.x0, s.y0, s.x1, s.y1, s.x2, s.y2, stroke_w);
            os << buf;
        }
    }
    os << "</svg>\n";
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace sketchgame
