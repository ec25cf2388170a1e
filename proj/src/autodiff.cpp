#include "skod/autodiff.hpp"

#include <memory>

#include <algorithm>
#include <cmath>

#include "skod/numerics.hpp"

namespace skod {

const Tensor& Var::value() const { return tape->node(index).value; }
const Tensor& Var::grad() const { return tape->node(index).grad; }

Var Tape::leaf(Tensor value, std::string name) {
    return push(std::move(value), std::move(name), nullptr);
}

Var Tape::push(Tensor value, std::string op,
               std::function<void(Tape&, std::size_t)> backward_fn) {
    Node n;
    n.value = std::move(value);
    n.op = std::move(op);
    n.backward = std::move(backward_fn);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var root) {
    if (root.tape != this) throw ContractError("backward: root from another tape");
    Node& r = nodes_[root.index];
    if (r.value.size() != 1)
        throw ContractError("backward: root must be scalar");
    for (Node& n : nodes_) {
        n.grad = Tensor(n.value.shape());
    }
    r.grad[0] = 1.0;
    for (std::size_t i = root.index + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward) n.backward(*this, i);
    }
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw ValueError(std::string(op) + ": shape mismatch");
}

} // namespace

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    auto ai = a.index, bi = b.index;
    return a.tape->push(std::move(out), "add", [ai, bi](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& ga = t.grad_of(ai);
        Tensor& gb = t.grad_of(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    auto ai = a.index, bi = b.index;
    return a.tape->push(std::move(out), "sub", [ai, bi](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& ga = t.grad_of(ai);
        Tensor& gb = t.grad_of(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    auto ai = a.index, bi = b.index;
    return a.tape->push(std::move(out), "mul", [ai, bi](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& av = t.node(ai).value;
        const Tensor& bv2 = t.node(bi).value;
        Tensor& ga = t.grad_of(ai);
        Tensor& gb = t.grad_of(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double c) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    auto ai = a.index;
    return a.tape->push(std::move(out), "scale", [ai, c](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& ga = t.grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Var add_const(Var a, double c) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    auto ai = a.index;
    return a.tape->push(std::move(out), "add_const", [ai](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& ga = t.grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] < 0.0) out[i] = 0.0;
    auto ai = a.index;
    return a.tape->push(std::move(out), "relu", [ai](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& v = t.node(self).value;
        Tensor& ga = t.grad_of(ai);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (v[i] > 0.0) ga[i] += g[i];
    });
}

Var concat(Var a, Var b) {
    if (a.value().rank() != 1 || b.value().rank() != 1)
        throw ValueError("concat: rank-1 inputs expected");
    std::size_t na = a.value().size(), nb = b.value().size();
    Tensor out({na + nb});
    std::copy(a.value().data(), a.value().data() + na, out.data());
    std::copy(b.value().data(), b.value().data() + nb, out.data() + na);
    auto ai = a.index, bi = b.index;
    return a.tape->push(std::move(out), "concat", [ai, bi, na, nb](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& ga = t.grad_of(ai);
        Tensor& gb = t.grad_of(bi);
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < nb; ++i) gb[i] += g[na + i];
    });
}

Var slice(Var a, std::size_t offset, std::size_t len) {
    if (a.value().rank() != 1) throw ValueError("slice: rank-1 input expected");
    if (offset + len > a.value().size()) throw ValueError("slice: out of range");
    Tensor out({len});
    std::copy(a.value().data() + offset, a.value().data() + offset + len, out.data());
    auto ai = a.index;
    return a.tape->push(std::move(out), "slice", [ai, offset, len](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& ga = t.grad_of(ai);
        for (std::size_t i = 0; i < len; ++i) ga[offset + i] += g[i];
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i];
    auto ai = a.index;
    return a.tape->push(Tensor::scalar(s), "sum", [ai](Tape& t, std::size_t self) {
        double g = t.node(self).grad[0];
        Tensor& ga = t.grad_of(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var mean_of(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw ValueError("mean_of: empty input");
    Tape* tape = scalars[0].tape;
    double s = 0.0;
    std::vector<std::size_t> idx;
    idx.reserve(scalars.size());
    for (const Var& v : scalars) {
        if (v.value().size() != 1) throw ContractError("mean_of: non-scalar input");
        s += v.value()[0];
        idx.push_back(v.index);
    }
    double inv = 1.0 / double(scalars.size());
    return tape->push(Tensor::scalar(s * inv), "mean_of",
                      [idx, inv](Tape& t, std::size_t self) {
                          double g = t.node(self).grad[0] * inv;
                          for (std::size_t i : idx) t.grad_of(i)[0] += g;
                      });
}

Var linear(Var w, Var x, Var b) {
    const Tensor& wv = w.value();
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (wv.rank() != 2 || xv.rank() != 1 || bv.rank() != 1)
        throw ValueError("linear: expected W rank-2, x and b rank-1");
    std::size_t out_dim = wv.dim(0), in_dim = wv.dim(1);
    if (xv.size() != in_dim || bv.size() != out_dim)
        throw ValueError("linear: shape mismatch");
    Tensor out({out_dim});
    for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = bv[o];
        const double* row = wv.data() + o * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * xv[i];
        out[o] = acc;
    }
    auto wi = w.index, xi = x.index, bi = b.index;
    return w.tape->push(std::move(out), "linear",
                        [wi, xi, bi, out_dim, in_dim](Tape& t, std::size_t self) {
                            const Tensor& g = t.node(self).grad;
                            const Tensor& wv2 = t.node(wi).value;
                            const Tensor& xv2 = t.node(xi).value;
                            Tensor& gw = t.grad_of(wi);
                            Tensor& gx = t.grad_of(xi);
                            Tensor& gb = t.grad_of(bi);
                            for (std::size_t o = 0; o < out_dim; ++o) {
                                double go = g[o];
                                gb[o] += go;
                                const double* wrow = wv2.data() + o * in_dim;
                                double* gwrow = gw.data() + o * in_dim;
                                for (std::size_t i = 0; i < in_dim; ++i) {
                                    gwrow[i] += go * xv2[i];
                                    gx[i] += go * wrow[i];
                                }
                            }
                        });
}

Var graph_conv(Var x, const std::vector<Tensor>& adjacency,
               const std::vector<Var>& thetas, Var bias) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw ValueError("graph_conv: expected (C,T,V) input");
    if (adjacency.size() != thetas.size())
        throw ValueError("graph_conv: one weight matrix per graph subset required");
    std::size_t cin = xv.dim(0), frames = xv.dim(1), joints = xv.dim(2);
    std::size_t cout = thetas[0].value().dim(1);
    for (const Tensor& a : adjacency)
        if (a.rank() != 2 || a.dim(0) != joints || a.dim(1) != joints)
            throw ValueError("graph_conv: adjacency does not match joint count");
    for (const Var& th : thetas)
        if (th.value().rank() != 2 || th.value().dim(0) != cin || th.value().dim(1) != cout)
            throw ValueError("graph_conv: weight shape mismatch");
    if (bias.value().size() != cout) throw ValueError("graph_conv: bias shape mismatch");

    std::size_t n_sub = adjacency.size();
    std::size_t tv = frames * joints;

    // spread[g][c,t,j] = sum_i x[c,t,i] * A_g[i,j]; kept for the backward pass
    auto spread = std::make_shared<std::vector<Tensor>>();
    spread->reserve(n_sub);
    for (std::size_t g = 0; g < n_sub; ++g) {
        Tensor s({cin, frames, joints});
        const Tensor& a = adjacency[g];
        for (std::size_t c = 0; c < cin; ++c) {
            const double* xc = xv.data() + c * tv;
            double* sc = s.data() + c * tv;
            for (std::size_t t = 0; t < frames; ++t) {
                const double* xt = xc + t * joints;
                double* st = sc + t * joints;
                for (std::size_t j = 0; j < joints; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < joints; ++i)
                        acc += xt[i] * a.data()[i * joints + j];
                    st[j] = acc;
                }
            }
        }
        spread->push_back(std::move(s));
    }

    Tensor out({cout, frames, joints});
    for (std::size_t o = 0; o < cout; ++o) {
        double b0 = bias.value()[o];
        double* oc = out.data() + o * tv;
        for (std::size_t i = 0; i < tv; ++i) oc[i] = b0;
    }
    for (std::size_t g = 0; g < n_sub; ++g) {
        const Tensor& th = thetas[g].value();
        const Tensor& s = (*spread)[g];
        for (std::size_t c = 0; c < cin; ++c) {
            const double* sc = s.data() + c * tv;
            for (std::size_t o = 0; o < cout; ++o) {
                double coef = th.data()[c * cout + o];
                if (coef == 0.0) continue;
                double* oc = out.data() + o * tv;
                for (std::size_t i = 0; i < tv; ++i) oc[i] += coef * sc[i];
            }
        }
    }

    std::vector<std::size_t> theta_idx;
    for (const Var& th : thetas) theta_idx.push_back(th.index);
    auto xi = x.index, bi = bias.index;
    // copy of adjacency kept alive by the closure
    auto adj = std::make_shared<std::vector<Tensor>>(adjacency);

    return x.tape->push(
        std::move(out), "graph_conv",
        [xi, bi, theta_idx, adj, spread, cin, cout, frames, joints, tv](Tape& t,
                                                                        std::size_t self) {
            const Tensor& g = t.node(self).grad;
            Tensor& gb = t.grad_of(bi);
            for (std::size_t o = 0; o < cout; ++o) {
                const double* go = g.data() + o * tv;
                double acc = 0.0;
                for (std::size_t i = 0; i < tv; ++i) acc += go[i];
                gb[o] += acc;
            }
            Tensor& gx = t.grad_of(xi);
            for (std::size_t gi = 0; gi < theta_idx.size(); ++gi) {
                const Tensor& th = t.node(theta_idx[gi]).value;
                Tensor& gth = t.grad_of(theta_idx[gi]);
                const Tensor& s = (*spread)[gi];
                const Tensor& a = (*adj)[gi];
                // d theta[c,o] = sum_{t,j} spread[c,t,j] * g[o,t,j]
                // d spread[c,t,j] = sum_o g[o,t,j] * theta[c,o]
                Tensor gs({cin, frames, joints});
                for (std::size_t c = 0; c < cin; ++c) {
                    const double* sc = s.data() + c * tv;
                    double* gsc = gs.data() + c * tv;
                    for (std::size_t o = 0; o < cout; ++o) {
                        const double* go = g.data() + o * tv;
                        double coef = th.data()[c * cout + o];
                        double acc = 0.0;
                        for (std::size_t i = 0; i < tv; ++i) {
                            acc += sc[i] * go[i];
                            gsc[i] += coef * go[i];
                        }
                        gth.data()[c * cout + o] += acc;
                    }
                }
                // d x[c,t,i] += sum_j gs[c,t,j] * A[i,j]
                for (std::size_t c = 0; c < cin; ++c) {
                    double* gxc = gx.data() + c * tv;
                    const double* gsc = gs.data() + c * tv;
                    for (std::size_t fr = 0; fr < frames; ++fr) {
                        double* gxt = gxc + fr * joints;
                        const double* gst = gsc + fr * joints;
                        for (std::size_t i = 0; i < joints; ++i) {
                            double acc = 0.0;
                            const double* arow = a.data() + i * joints;
                            for (std::size_t j = 0; j < joints; ++j)
                                acc += gst[j] * arow[j];
                            gxt[i] += acc;
                        }
                    }
                }
            }
        });
}

Var temporal_conv(Var x, Var weight, Var bias, std::size_t stride) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 3) throw ValueError("temporal_conv: expected (C,T,V) input");
    std::size_t channels = xv.dim(0), frames = xv.dim(1), joints = xv.dim(2);
    if (wv.rank() != 2 || wv.dim(0) != channels)
        throw ValueError("temporal_conv: weight shape mismatch");
    std::size_t kernel = wv.dim(1);
    if (kernel % 2 == 0) throw ValueError("temporal_conv: kernel must be odd");
    if (bv.size() != channels) throw ValueError("temporal_conv: bias shape mismatch");
    if (stride == 0) throw ValueError("temporal_conv: stride must be positive");
    std::size_t pad = (kernel - 1) / 2;
    std::size_t out_frames = (frames + stride - 1) / stride;

    Tensor out({channels, out_frames, joints});
    for (std::size_t c = 0; c < channels; ++c) {
        const double* wc = wv.data() + c * kernel;
        double b0 = bv[c];
        for (std::size_t to = 0; to < out_frames; ++to) {
            double* orow = out.data() + (c * out_frames + to) * joints;
            for (std::size_t j = 0; j < joints; ++j) orow[j] = b0;
            for (std::size_t k = 0; k < kernel; ++k) {
                std::ptrdiff_t ti = std::ptrdiff_t(to * stride + k) - std::ptrdiff_t(pad);
                if (ti < 0 || ti >= std::ptrdiff_t(frames)) continue;
                const double* xrow = xv.data() + (c * frames + std::size_t(ti)) * joints;
                double wk = wc[k];
                for (std::size_t j = 0; j < joints; ++j) orow[j] += wk * xrow[j];
            }
        }
    }

    auto xi = x.index, wi = weight.index, bi = bias.index;
    return x.tape->push(
        std::move(out), "temporal_conv",
        [xi, wi, bi, stride, channels, frames, joints, kernel, pad,
         out_frames](Tape& t, std::size_t self) {
            const Tensor& g = t.node(self).grad;
            const Tensor& xv2 = t.node(xi).value;
            const Tensor& wv2 = t.node(wi).value;
            Tensor& gx = t.grad_of(xi);
            Tensor& gw = t.grad_of(wi);
            Tensor& gb = t.grad_of(bi);
            for (std::size_t c = 0; c < channels; ++c) {
                const double* wc = wv2.data() + c * kernel;
                double* gwc = gw.data() + c * kernel;
                for (std::size_t to = 0; to < out_frames; ++to) {
                    const double* grow = g.data() + (c * out_frames + to) * joints;
                    double gsum = 0.0;
                    for (std::size_t j = 0; j < joints; ++j) gsum += grow[j];
                    gb[c] += gsum;
                    for (std::size_t k = 0; k < kernel; ++k) {
                        std::ptrdiff_t ti =
                            std::ptrdiff_t(to * stride + k) - std::ptrdiff_t(pad);
                        if (ti < 0 || ti >= std::ptrdiff_t(frames)) continue;
                        const double* xrow =
                            xv2.data() + (c * frames + std::size_t(ti)) * joints;
                        double* gxrow =
                            gx.data() + (c * frames + std::size_t(ti)) * joints;
                        double wk = wc[k];
                        double acc = 0.0;
                        for (std::size_t j = 0; j < joints; ++j) {
                            acc += grow[j] * xrow[j];
                            gxrow[j] += wk * grow[j];
                        }
                        gwc[k] += acc;
                    }
                }
            }
        });
}

Var global_pool(Var x) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3) throw ValueError("global_pool: expected (C,T,V) input");
    std::size_t channels = xv.dim(0), frames = xv.dim(1), joints = xv.dim(2);
    std::size_t tv = frames * joints;
    double inv = 1.0 / double(tv);
    Tensor out({channels});
    for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = xv.data() + c * tv;
        double acc = 0.0;
        for (std::size_t i = 0; i < tv; ++i) acc += xc[i];
        out[c] = acc * inv;
    }
    auto xi = x.index;
    return x.tape->push(std::move(out), "global_pool",
                        [xi, channels, tv, inv](Tape& t, std::size_t self) {
                            const Tensor& g = t.node(self).grad;
                            Tensor& gx = t.grad_of(xi);
                            for (std::size_t c = 0; c < channels; ++c) {
                                double gc = g[c] * inv;
                                double* gxc = gx.data() + c * tv;
                                for (std::size_t i = 0; i < tv; ++i) gxc[i] += gc;
                            }
                        });
}

Var ash_shape(Var f, const AshConfig& cfg) {
    const Tensor& fv = f.value();
    if (fv.rank() != 1) throw ValueError("ash_shape: rank-1 input expected");
    AshResult res = ash_apply(fv.values(), cfg);
    Tensor out = Tensor::vector(res.values);
    auto fi = f.index;
    auto mask = std::make_shared<std::vector<std::uint8_t>>(std::move(res.mask));
    AshStrategy strat = cfg.strategy;
    bool degenerate = res.degenerate;
    return f.tape->push(
        std::move(out), "ash_shape",
        [fi, mask, strat, degenerate](Tape& t, std::size_t self) {
            if (degenerate) return; // all-zero output, no gradient path
            const Tensor& g = t.node(self).grad;
            const Tensor& fv2 = t.node(fi).value;
            Tensor& gf = t.grad_of(fi);
            std::size_t n = g.size();
            const auto& m = *mask;
            switch (strat) {
                case AshStrategy::P:
                case AshStrategy::Off: {
                    for (std::size_t i = 0; i < n; ++i)
                        if (m[i]) gf[i] += g[i];
                    break;
                }
                case AshStrategy::B: {
                    // out_i = surv_i * s/nz with s = sum(F); the fill indices
                    // (mask && F != 0) are held fixed.
                    std::size_t nz = 0;
                    for (std::size_t i = 0; i < n; ++i)
                        if (m[i] && fv2[i] != 0.0) ++nz;
                    double gsum = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        if (m[i] && fv2[i] != 0.0) gsum += g[i];
                    double d = gsum / double(nz);
                    for (std::size_t i = 0; i < n; ++i) gf[i] += d;
                    break;
                }
                case AshStrategy::S: {
                    // out_i = surv_i * F_i * exp(s1/s2); both sums carry
                    // gradient, the survivor set is held fixed.
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        s1 += fv2[i];
                        if (m[i]) s2 += fv2[i];
                    }
                    double factor = std::exp(s1 / s2);
                    // A = sum_i g_i * surv_i * F_i
                    double a = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        if (m[i]) a += g[i] * fv2[i];
                    double c1 = a * factor / s2;          // via s1
                    double c2 = a * factor * s1 / (s2 * s2); // via s2
                    for (std::size_t i = 0; i < n; ++i) {
                        gf[i] += c1;
                        if (m[i]) gf[i] += factor * g[i] - c2;
                    }
                    break;
                }
            }
        });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) {
        // identity node keeps the graph uniform between modes
        return scale(x, 1.0);
    }
    std::size_t n = x.value().size();
    auto keep = std::make_shared<std::vector<double>>(n);
    double inv_keep = 1.0 / (1.0 - rate);
    Tensor out = x.value();
    for (std::size_t i = 0; i < n; ++i) {
        double k = (rng.uniform() >= rate) ? inv_keep : 0.0;
        (*keep)[i] = k;
        out[i] *= k;
    }
    auto xi = x.index;
    return x.tape->push(std::move(out), "dropout", [xi, keep](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        Tensor& gx = t.grad_of(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*keep)[i];
    });
}

Var logsumexp_op(Var x, double epsilon) {
    const Tensor& xv = x.value();
    if (xv.rank() != 1) throw ValueError("logsumexp_op: rank-1 input expected");
    double value = logsumexp(std::span<const double>(xv.data(), xv.size()), epsilon);
    auto xi = x.index;
    return x.tape->push(Tensor::scalar(value), "logsumexp",
                        [xi, epsilon, value](Tape& t, std::size_t self) {
                            double g = t.node(self).grad[0];
                            const Tensor& xv2 = t.node(xi).value;
                            Tensor& gx = t.grad_of(xi);
                            // d/dx_i = exp((x_i - lse)/eps), a softmax weight
                            for (std::size_t i = 0; i < xv2.size(); ++i)
                                gx[i] += g * std::exp((xv2[i] - value) / epsilon);
                        });
}

Var cross_entropy(Var logits, std::size_t target) {
    const Tensor& lv = logits.value();
    if (lv.rank() != 1) throw ValueError("cross_entropy: rank-1 logits expected");
    if (target >= lv.size()) throw ValueError("cross_entropy: target out of range");
    double lse = logsumexp(std::span<const double>(lv.data(), lv.size()), 1.0);
    double value = lse - lv[target];
    auto li = logits.index;
    return logits.tape->push(Tensor::scalar(value), "cross_entropy",
                             [li, target, lse](Tape& t, std::size_t self) {
                                 double g = t.node(self).grad[0];
                                 const Tensor& lv2 = t.node(li).value;
                                 Tensor& gl = t.grad_of(li);
                                 for (std::size_t i = 0; i < lv2.size(); ++i) {
                                     double p = std::exp(lv2[i] - lse);
                                     gl[i] += g * (p - (i == target ? 1.0 : 0.0));
                                 }
                             });
}

Var hinge_sq(Var x, double margin) {
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        double d = out[i] - margin;
        out[i] = d > 0.0 ? d * d : 0.0;
    }
    auto xi = x.index;
    return x.tape->push(std::move(out), "hinge_sq", [xi, margin](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& xv = t.node(xi).value;
        Tensor& gx = t.grad_of(xi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double d = xv[i] - margin;
            if (d > 0.0) gx[i] += g[i] * 2.0 * d;
        }
    });
}

} // namespace skod
