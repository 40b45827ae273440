#include "sketchgame/tape.hpp"

#include <cmath>

#include "sketchgame/errors.hpp"

namespace sketchgame {

int Tape::push(Tensor value, std::vector<int> parents, BackFn back, bool force_requires) {
    bool req = force_requires;
    for (int p : parents)
        if (requires_[static_cast<size_t>(p)]) req = true;
    int id = static_cast<int>(values_.size());
    values_.push_back(std::move(value));
    grads_.emplace_back();
    requires_.push_back(req ? 1 : 0);
    backs_.push_back(req ? std::move(back) : BackFn{});
    parents_.push_back(std::move(parents));
    return id;
}

void Tape::ensure_grad(int id) {
    Tensor& g = grads_[static_cast<size_t>(id)];
    if (g.shape.empty() && !values_[static_cast<size_t>(id)].shape.empty())
        g = Tensor(values_[static_cast<size_t>(id)].shape);
}

Tensor& Tape::grad(Var v) {
    ensure_grad(v.id);
    return grads_[static_cast<size_t>(v.id)];
}

Var Tape::constant(Tensor value) { return {push(std::move(value), {}, {}, false)}; }

Var Tape::leaf(Tensor value) { return {push(std::move(value), {}, {}, true)}; }

Var Tape::param(Param& p) {
    int id = push(p.value, {}, {}, true);
    bound_.emplace_back(id, &p);
    return {id};
}

Var Tape::make_node(Tensor value, std::vector<int> parents, BackFn back) {
    return {push(std::move(value), std::move(parents), std::move(back))};
}

void Tape::backward(Var loss) {
    if (value(loss).size() != 1)
        throw NumericalError("backward: loss must be scalar");
    ensure_grad(loss.id);
    grads_[static_cast<size_t>(loss.id)].data[0] += 1.0;
    for (int id = loss.id; id >= 0; --id) {
        if (!requires_[static_cast<size_t>(id)] || !backs_[static_cast<size_t>(id)]) continue;
        if (grads_[static_cast<size_t>(id)].shape.empty()) continue;  // never touched
        backs_[static_cast<size_t>(id)](*this, id);
    }
    for (auto& [id, p] : bound_) {
        Tensor& g = grads_[static_cast<size_t>(id)];
        if (g.shape.empty()) continue;
        for (int i = 0; i < g.size(); ++i) p->grad[i] += g[i];
        g.fill(0.0);  // bound grads consumed; repeated backward() re-accumulates
    }
}

namespace {

// Shorthand for elementwise binary ops.
Tensor map2(const Tensor& a, const Tensor& b, double (*f)(double, double)) {
    Tensor out(a.shape);
    for (int i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw ConfigError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var Tape::add(Var a, Var b) {
    check_same_shape(value(a), value(b), "add");
    Tensor out = map2(value(a), value(b), [](double x, double y) { return x + y; });
    int pa = a.id, pb = b.id;
    return make_node(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        if (TapeAccess::needs_grad(t, pa)) {
            Tensor& ga = TapeAccess::grad(t, pa);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (TapeAccess::needs_grad(t, pb)) {
            Tensor& gb = TapeAccess::grad(t, pb);
            for (int i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(value(a), value(b), "sub");
    Tensor out = map2(value(a), value(b), [](double x, double y) { return x - y; });
    int pa = a.id, pb = b.id;
    return make_node(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        if (TapeAccess::needs_grad(t, pa)) {
            Tensor& ga = TapeAccess::grad(t, pa);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (TapeAccess::needs_grad(t, pb)) {
            Tensor& gb = TapeAccess::grad(t, pb);
            for (int i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(value(a), value(b), "mul");
    Tensor out = map2(value(a), value(b), [](double x, double y) { return x * y; });
    int pa = a.id, pb = b.id;
    return make_node(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& va = TapeAccess::value(t, pa);
        const Tensor& vb = TapeAccess::value(t, pb);
        if (TapeAccess::needs_grad(t, pa)) {
            Tensor& ga = TapeAccess::grad(t, pa);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
        }
        if (TapeAccess::needs_grad(t, pb)) {
            Tensor& gb = TapeAccess::grad(t, pb);
            for (int i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
        }
    });
}

Var Tape::scale(Var a, double s) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] * s;
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa, s](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
}

Var Tape::add_scalar(Var a, double s) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] + s;
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var Tape::relu(Var a) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] > 0.0 ? value(a)[i] : 0.0;
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& va = TapeAccess::value(t, pa);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i)
            if (va[i] > 0.0) ga[i] += g[i];
    });
}

Var Tape::sigmoid(Var a) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-value(a)[i]));
    int pa = a.id;
    int self_hint = static_cast<int>(values_.size());
    (void)self_hint;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& y = TapeAccess::value(t, self);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var Tape::tanh_(Var a) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = std::tanh(value(a)[i]);
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& y = TapeAccess::value(t, self);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var Tape::exp_(Var a) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = std::exp(value(a)[i]);
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& y = TapeAccess::value(t, self);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
}

Var Tape::log_(Var a) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = std::log(value(a)[i]);
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& x = TapeAccess::value(t, pa);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    });
}

Var Tape::square(Var a) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] * value(a)[i];
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& x = TapeAccess::value(t, pa);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * x[i];
    });
}

Var Tape::clamp(Var a, double lo, double hi) {
    Tensor out(value(a).shape);
    for (int i = 0; i < out.size(); ++i) {
        double x = value(a)[i];
        out[i] = x < lo ? lo : (x > hi ? hi : x);
    }
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa, lo, hi](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& x = TapeAccess::value(t, pa);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i)
            if (x[i] > lo && x[i] < hi) ga[i] += g[i];
    });
}

Var Tape::affine(Var W, Var b, Var x) {
    const Tensor& w = value(W);
    const Tensor& xv = value(x);
    const Tensor& bv = value(b);
    if (w.shape.size() != 2 || w.shape[1] != xv.size() || bv.size() != w.shape[0])
        throw ConfigError("affine: shape mismatch");
    int m = w.shape[0], n = w.shape[1];
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double s = bv[i];
        const double* row = &w.data[static_cast<size_t>(i) * n];
        for (int j = 0; j < n; ++j) s += row[j] * xv[j];
        out[i] = s;
    }
    int pw = W.id, pb = b.id, px = x.id;
    return make_node(std::move(out), {pw, pb, px}, [pw, pb, px, m, n](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& w = TapeAccess::value(t, pw);
        const Tensor& xv = TapeAccess::value(t, px);
        if (TapeAccess::needs_grad(t, pw)) {
            Tensor& gw = TapeAccess::grad(t, pw);
            for (int i = 0; i < m; ++i) {
                double gi = g[i];
                double* row = &gw.data[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) row[j] += gi * xv[j];
            }
        }
        if (TapeAccess::needs_grad(t, pb)) {
            Tensor& gb = TapeAccess::grad(t, pb);
            for (int i = 0; i < m; ++i) gb[i] += g[i];
        }
        if (TapeAccess::needs_grad(t, px)) {
            Tensor& gx = TapeAccess::grad(t, px);
            for (int i = 0; i < m; ++i) {
                double gi = g[i];
                const double* row = &w.data[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) gx[j] += gi * row[j];
            }
        }
    });
}

Var Tape::conv2d(Var x, Var W, Var b, int stride, int pad) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(W);
    const Tensor& bv = value(b);
    if (xv.shape.size() != 3 || wv.shape.size() != 4 || wv.shape[1] != xv.shape[0] ||
        bv.size() != wv.shape[0])
        throw ConfigError("conv2d: shape mismatch");
    int C = xv.shape[0], H = xv.shape[1], Wd = xv.shape[2];
    int F = wv.shape[0], K = wv.shape[2];
    int OH = (H + 2 * pad - K) / stride + 1;
    int OW = (Wd + 2 * pad - K) / stride + 1;
    Tensor out({F, OH, OW});
    for (int f = 0; f < F; ++f) {
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                double s = bv[f];
                for (int c = 0; c < C; ++c) {
                    for (int kh = 0; kh < K; ++kh) {
                        int ih = oh * stride - pad + kh;
                        if (ih < 0 || ih >= H) continue;
                        const double* in_row = &xv.data[(static_cast<size_t>(c) * H + ih) * Wd];
                        const double* w_row =
                            &wv.data[((static_cast<size_t>(f) * C + c) * K + kh) * K];
                        for (int kw = 0; kw < K; ++kw) {
                            int iw = ow * stride - pad + kw;
                            if (iw < 0 || iw >= Wd) continue;
                            s += in_row[iw] * w_row[kw];
                        }
                    }
                }
                out.data[(static_cast<size_t>(f) * OH + oh) * OW + ow] = s;
            }
        }
    }
    int px = x.id, pw = W.id, pb = b.id;
    return make_node(std::move(out), {px, pw, pb},
                     [px, pw, pb, C, H, Wd, F, K, OH, OW, stride, pad](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& xv = TapeAccess::value(t, px);
        const Tensor& wv = TapeAccess::value(t, pw);
        bool need_x = TapeAccess::needs_grad(t, px);
        bool need_w = TapeAccess::needs_grad(t, pw);
        bool need_b = TapeAccess::needs_grad(t, pb);
        Tensor* gx = need_x ? &TapeAccess::grad(t, px) : nullptr;
        Tensor* gw = need_w ? &TapeAccess::grad(t, pw) : nullptr;
        Tensor* gb = need_b ? &TapeAccess::grad(t, pb) : nullptr;
        for (int f = 0; f < F; ++f) {
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    double go = g.data[(static_cast<size_t>(f) * OH + oh) * OW + ow];
                    if (go == 0.0) continue;
                    if (gb) gb->data[static_cast<size_t>(f)] += go;
                    for (int c = 0; c < C; ++c) {
                        for (int kh = 0; kh < K; ++kh) {
                            int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            size_t in_off = (static_cast<size_t>(c) * H + ih) * Wd;
                            size_t w_off = ((static_cast<size_t>(f) * C + c) * K + kh) * K;
                            for (int kw = 0; kw < K; ++kw) {
                                int iw = ow * stride - pad + kw;
                                if (iw < 0 || iw >= Wd) continue;
                                if (gw) gw->data[w_off + kw] += go * xv.data[in_off + iw];
                                if (gx) gx->data[in_off + iw] += go * wv.data[w_off + kw];
                            }
                        }
                    }
                }
            }
        }
    });
}

Var Tape::softmax(Var logits) {
    const Tensor& z = value(logits);
    Tensor out(z.shape);
    double mx = z[0];
    for (int i = 1; i < z.size(); ++i) mx = std::max(mx, z[i]);
    double Z = 0.0;
    for (int i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        Z += out[i];
    }
    for (int i = 0; i < z.size(); ++i) out[i] /= Z;
    int pz = logits.id;
    return make_node(std::move(out), {pz}, [pz](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& p = TapeAccess::value(t, self);
        Tensor& gz = TapeAccess::grad(t, pz);
        double gd = 0.0;
        for (int i = 0; i < g.size(); ++i) gd += g[i] * p[i];
        for (int i = 0; i < g.size(); ++i) gz[i] += p[i] * (g[i] - gd);
    });
}

Var Tape::masked_softmax(Var logits, const std::vector<int>& allowed) {
    const Tensor& z = value(logits);
    Tensor out(z.shape, 0.0);
    double mx = -1e300;
    for (int i : allowed) mx = std::max(mx, z[i]);
    double Z = 0.0;
    for (int i : allowed) {
        out[i] = std::exp(z[i] - mx);
        Z += out[i];
    }
    for (int i : allowed) out[i] /= Z;
    int pz = logits.id;
    std::vector<int> idx = allowed;
    return make_node(std::move(out), {pz}, [pz, idx](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        const Tensor& p = TapeAccess::value(t, self);
        Tensor& gz = TapeAccess::grad(t, pz);
        double gd = 0.0;
        for (int i : idx) gd += g[i] * p[i];
        for (int i : idx) gz[i] += p[i] * (g[i] - gd);
    });
}

Var Tape::sum(Var a) {
    Tensor out = Tensor::scalar(value(a).sum());
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        double g = TapeAccess::grad(t, self)[0];
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var Tape::dot(Var a, Var b) {
    check_same_shape(value(a), value(b), "dot");
    double s = 0.0;
    for (int i = 0; i < value(a).size(); ++i) s += value(a)[i] * value(b)[i];
    int pa = a.id, pb = b.id;
    return make_node(Tensor::scalar(s), {pa, pb}, [pa, pb](Tape& t, int self) {
        double g = TapeAccess::grad(t, self)[0];
        const Tensor& va = TapeAccess::value(t, pa);
        const Tensor& vb = TapeAccess::value(t, pb);
        if (TapeAccess::needs_grad(t, pa)) {
            Tensor& ga = TapeAccess::grad(t, pa);
            for (int i = 0; i < va.size(); ++i) ga[i] += g * vb[i];
        }
        if (TapeAccess::needs_grad(t, pb)) {
            Tensor& gb = TapeAccess::grad(t, pb);
            for (int i = 0; i < vb.size(); ++i) gb[i] += g * va[i];
        }
    });
}

Var Tape::sqnorm(Var a) {
    double s = 0.0;
    for (int i = 0; i < value(a).size(); ++i) s += value(a)[i] * value(a)[i];
    int pa = a.id;
    return make_node(Tensor::scalar(s), {pa}, [pa](Tape& t, int self) {
        double g = TapeAccess::grad(t, self)[0];
        const Tensor& x = TapeAccess::value(t, pa);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < x.size(); ++i) ga[i] += 2.0 * g * x[i];
    });
}

Var Tape::dot_const(Var a, const Tensor& c) {
    if (value(a).size() != c.size()) throw NumericalError("dot_const: size mismatch");
    double s = 0.0;
    for (int i = 0; i < c.size(); ++i) s += value(a)[i] * c[i];
    int pa = a.id;
    Tensor cc = c;
    return make_node(Tensor::scalar(s), {pa}, [pa, cc](Tape& t, int self) {
        double g = TapeAccess::grad(t, self)[0];
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < cc.size(); ++i) ga[i] += g * cc[i];
    });
}

Var Tape::pick(Var a, int idx) {
    int pa = a.id;
    return make_node(Tensor::scalar(value(a)[idx]), {pa}, [pa, idx](Tape& t, int self) {
        double g = TapeAccess::grad(t, self)[0];
        TapeAccess::grad(t, pa)[idx] += g;
    });
}

Var Tape::concat(const std::vector<Var>& xs, std::vector<int> out_shape) {
    long total = 0;
    std::vector<int> parents;
    for (Var v : xs) {
        total += value(v).size();
        parents.push_back(v.id);
    }
    if (out_shape.empty()) out_shape = {static_cast<int>(total)};
    if (Tensor::count(out_shape) != total) throw ConfigError("concat: shape mismatch");
    Tensor out(out_shape);
    long off = 0;
    for (Var v : xs) {
        const Tensor& t = value(v);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
        off += t.size();
    }
    std::vector<int> ps = parents;
    return make_node(std::move(out), parents, [ps](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        long off = 0;
        for (int p : ps) {
            const Tensor& v = TapeAccess::value(t, p);
            if (TapeAccess::needs_grad(t, p)) {
                Tensor& gp = TapeAccess::grad(t, p);
                for (int i = 0; i < v.size(); ++i) gp[i] += g.data[static_cast<size_t>(off + i)];
            }
            off += v.size();
        }
    });
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    if (Tensor::count(shape) != value(a).size()) throw ConfigError("reshape: size mismatch");
    Tensor out = value(a);
    out.shape = std::move(shape);
    int pa = a.id;
    return make_node(std::move(out), {pa}, [pa](Tape& t, int self) {
        const Tensor& g = TapeAccess::grad(t, self);
        Tensor& ga = TapeAccess::grad(t, pa);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

}  // namespace sketchgame
