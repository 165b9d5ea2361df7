#include "mmsr/autograd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

namespace mmsr::ag {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

void Node::accum_grad(const Tensor& g) {
    if (!has_grad()) grad = Tensor(value.shape);
    for (int i = 0; i < grad.size(); ++i) grad[i] += g[i];
}

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

Var detach(const Var& v) { return leaf(v->value, false); }

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void()> bp) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(bp);
    return n;
}

void topo(const Var& v, std::unordered_set<Node*>& seen, std::vector<Var>& order) {
    if (!v->requires_grad || seen.count(v.get())) return;
    seen.insert(v.get());
    for (const auto& p : v->parents) topo(p, seen, order);
    order.push_back(v);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ShapeError(std::string(op) + ": " + a->value.shape_str() + " vs " + b->value.shape_str());
}

} // namespace

void backward(const Var& root) {
    if (root->value.size() != 1) throw ShapeError("backward root must be scalar");
    if (!root->requires_grad) return;
    std::unordered_set<Node*> seen;
    std::vector<Var> order;
    topo(root, seen, order);
    root->accum_grad(Tensor::scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = it->get();
        if (n->backprop && n->has_grad()) n->backprop();
    }
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, b] {
            if (a->requires_grad) a->accum_grad(self->grad);
            if (b->requires_grad) b->accum_grad(self->grad);
        };
    return n;
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, b] {
            if (a->requires_grad) a->accum_grad(self->grad);
            if (b->requires_grad) {
                Tensor g(self->grad.shape);
                for (int i = 0; i < g.size(); ++i) g[i] = -self->grad[i];
                b->accum_grad(g);
            }
        };
    return n;
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, b] {
            if (a->requires_grad) {
                Tensor g(self->grad.shape);
                for (int i = 0; i < g.size(); ++i) g[i] = self->grad[i] * b->value[i];
                a->accum_grad(g);
            }
            if (b->requires_grad) {
                Tensor g(self->grad.shape);
                for (int i = 0; i < g.size(); ++i) g[i] = self->grad[i] * a->value[i];
                b->accum_grad(g);
            }
        };
    return n;
}

Var div(const Var& a, const Var& b) {
    check_same_shape(a, b, "div");
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] / b->value[i];
    auto n = make_node(std::move(out), {a, b}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, b] {
            if (a->requires_grad) {
                Tensor g(self->grad.shape);
                for (int i = 0; i < g.size(); ++i) g[i] = self->grad[i] / b->value[i];
                a->accum_grad(g);
            }
            if (b->requires_grad) {
                Tensor g(self->grad.shape);
                for (int i = 0; i < g.size(); ++i)
                    g[i] = -self->grad[i] * a->value[i] / (b->value[i] * b->value[i]);
                b->accum_grad(g);
            }
        };
    return n;
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] + s;
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a] { a->accum_grad(self->grad); };
    return n;
}

Var mul_scalar(const Var& a, double s) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] * s;
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, s] {
            Tensor g(self->grad.shape);
            for (int i = 0; i < g.size(); ++i) g[i] = self->grad[i] * s;
            a->accum_grad(g);
        };
    return n;
}

Var scalar_sub(double s, const Var& a) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = s - a->value[i];
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a] {
            Tensor g(self->grad.shape);
            for (int i = 0; i < g.size(); ++i) g[i] = -self->grad[i];
            a->accum_grad(g);
        };
    return n;
}

Var abs(const Var& a) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = std::abs(a->value[i]);
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a] {
            Tensor g(self->grad.shape);
            for (int i = 0; i < g.size(); ++i)
                g[i] = self->grad[i] * (a->value[i] > 0 ? 1.0 : (a->value[i] < 0 ? -1.0 : 0.0));
            a->accum_grad(g);
        };
    return n;
}

Var relu(const Var& a) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = a->value[i] > 0 ? a->value[i] : 0.0;
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a] {
            Tensor g(self->grad.shape);
            for (int i = 0; i < g.size(); ++i) g[i] = a->value[i] > 0 ? self->grad[i] : 0.0;
            a->accum_grad(g);
        };
    return n;
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i)
        out[i] = a->value[i] > 0 ? a->value[i] : slope * a->value[i];
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, slope] {
            Tensor g(self->grad.shape);
            for (int i = 0; i < g.size(); ++i)
                g[i] = self->grad[i] * (a->value[i] > 0 ? 1.0 : slope);
            a->accum_grad(g);
        };
    return n;
}

Var tanh(const Var& a) {
    Tensor out(a->value.shape);
    for (int i = 0; i < out.size(); ++i) out[i] = std::tanh(a->value[i]);
    auto n = make_node(std::move(out), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a] {
            Tensor g(self->grad.shape);
            for (int i = 0; i < g.size(); ++i) {
                double t = self->value[i];
                g[i] = self->grad[i] * (1.0 - t * t);
            }
            a->accum_grad(g);
        };
    return n;
}

Var mean_all(const Var& a) {
    double s = 0.0;
    for (int i = 0; i < a->value.size(); ++i) s += a->value[i];
    int cnt = a->value.size();
    auto n = make_node(Tensor::scalar(s / cnt), {a}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, a, cnt] {
            Tensor g(a->value.shape);
            double gs = self->grad[0] / cnt;
            for (int i = 0; i < g.size(); ++i) g[i] = gs;
            a->accum_grad(g);
        };
    return n;
}

namespace {

// cols: (C*k*k) x (Ho*Wo)
void im2col(const Tensor& x, int k, int stride, int pad, int ho, int wo, MatRM& cols) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    cols.resize(static_cast<Eigen::Index>(C) * k * k, static_cast<Eigen::Index>(ho) * wo);
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ki) * k + kj;
                for (int oi = 0; oi < ho; ++oi) {
                    const int ii = oi * stride + ki - pad;
                    double* dst = cols.data() + row * cols.cols() + static_cast<Eigen::Index>(oi) * wo;
                    if (ii < 0 || ii >= H) {
                        for (int oj = 0; oj < wo; ++oj) dst[oj] = 0.0;
                        continue;
                    }
                    const double* src = &x.data[(static_cast<size_t>(c) * H + ii) * W];
                    for (int oj = 0; oj < wo; ++oj) {
                        const int jj = oj * stride + kj - pad;
                        dst[oj] = (jj < 0 || jj >= W) ? 0.0 : src[jj];
                    }
                }
            }
        }
    }
}

void col2im_accum(const MatRM& cols, int C, int H, int W, int k, int stride, int pad,
                  int ho, int wo, Tensor& dx) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ki) * k + kj;
                const double* src_row = cols.data() + row * cols.cols();
                for (int oi = 0; oi < ho; ++oi) {
                    const int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    double* dst = &dx.data[(static_cast<size_t>(c) * H + ii) * W];
                    const double* src = src_row + static_cast<Eigen::Index>(oi) * wo;
                    for (int oj = 0; oj < wo; ++oj) {
                        const int jj = oj * stride + kj - pad;
                        if (jj >= 0 && jj < W) dst[jj] += src[oj];
                    }
                }
            }
        }
    }
}

} // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.rank() != 3 || wv.rank() != 4) throw ShapeError("conv2d expects {C,H,W} and {F,C,k,k}");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int F = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != C) throw ShapeError("conv2d channel mismatch");
    if (b->value.size() != F) throw ShapeError("conv2d bias size mismatch");
    const int ho = (H + 2 * pad - k) / stride + 1;
    const int wo = (W + 2 * pad - k) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeError("conv2d output would be empty");

    MatRM cols;
    im2col(xv, k, stride, pad, ho, wo, cols);
    CMapRM wm(wv.data.data(), F, static_cast<Eigen::Index>(C) * k * k);

    Tensor out({F, ho, wo});
    MapRM om(out.data.data(), F, static_cast<Eigen::Index>(ho) * wo);
    om.noalias() = wm * cols;
    for (int f = 0; f < F; ++f) om.row(f).array() += b->value[f];

    auto n = make_node(std::move(out), {x, w, b}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        // im2col is recomputed in the backward pass instead of cached;
        // holding the column matrix for every conv in a deep graph
        // dominates memory otherwise
        n->backprop = [self, x, w, b, stride, pad, k, C, H, W, F, ho, wo] {
            CMapRM gy(self->grad.data.data(), F, static_cast<Eigen::Index>(ho) * wo);
            MatRM cols2;
            im2col(x->value, k, stride, pad, ho, wo, cols2);
            if (w->requires_grad) {
                Tensor gw(w->value.shape);
                MapRM gwm(gw.data.data(), F, static_cast<Eigen::Index>(C) * k * k);
                gwm.noalias() = gy * cols2.transpose();
                w->accum_grad(gw);
            }
            if (b->requires_grad) {
                Tensor gb(b->value.shape);
                for (int f = 0; f < F; ++f) gb[f] = gy.row(f).sum();
                b->accum_grad(gb);
            }
            if (x->requires_grad) {
                CMapRM wm2(w->value.data.data(), F, static_cast<Eigen::Index>(C) * k * k);
                MatRM dcols = wm2.transpose() * gy;
                Tensor gx({C, H, W});
                col2im_accum(dcols, C, H, W, k, stride, pad, ho, wo, gx);
                x->accum_grad(gx);
            }
        };
    return n;
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("instance_norm expects {C,H,W}");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    if (gamma->value.size() != C || beta->value.size() != C)
        throw ShapeError("instance_norm affine size mismatch");
    const int n_px = H * W;

    Tensor out(xv.shape);
    std::vector<double> mu(C), istd(C);
    for (int c = 0; c < C; ++c) {
        const double* px = &xv.data[static_cast<size_t>(c) * n_px];
        double m = 0.0;
        for (int i = 0; i < n_px; ++i) m += px[i];
        m /= n_px;
        double v = 0.0;
        for (int i = 0; i < n_px; ++i) v += (px[i] - m) * (px[i] - m);
        v /= n_px;
        mu[c] = m;
        istd[c] = 1.0 / std::sqrt(v + eps);
        double* po = &out.data[static_cast<size_t>(c) * n_px];
        const double g = gamma->value[c], bt = beta->value[c];
        for (int i = 0; i < n_px; ++i) po[i] = g * (px[i] - m) * istd[c] + bt;
    }

    auto nd = make_node(std::move(out), {x, gamma, beta}, nullptr);
    Node* self = nd.get();
    if (nd->requires_grad)
        nd->backprop = [self, x, gamma, beta, C, n_px, mu, istd] {
            Tensor gx(x->value.shape), gg({C}), gb({C});
            for (int c = 0; c < C; ++c) {
                const double* px = &x->value.data[static_cast<size_t>(c) * n_px];
                const double* gy = &self->grad.data[static_cast<size_t>(c) * n_px];
                const double g = gamma->value[c];
                double sum_gy = 0.0, sum_gy_xh = 0.0;
                for (int i = 0; i < n_px; ++i) {
                    const double xh = (px[i] - mu[c]) * istd[c];
                    sum_gy += gy[i];
                    sum_gy_xh += gy[i] * xh;
                }
                gb[c] = sum_gy;
                gg[c] = sum_gy_xh;
                const double m_gy = sum_gy / n_px, m_gy_xh = sum_gy_xh / n_px;
                double* pgx = &gx.data[static_cast<size_t>(c) * n_px];
                for (int i = 0; i < n_px; ++i) {
                    const double xh = (px[i] - mu[c]) * istd[c];
                    pgx[i] = g * istd[c] * (gy[i] - m_gy - xh * m_gy_xh);
                }
            }
            if (x->requires_grad) x->accum_grad(gx);
            if (gamma->requires_grad) gamma->accum_grad(gg);
            if (beta->requires_grad) beta->accum_grad(gb);
        };
    return nd;
}

Var pixel_shuffle(const Var& x, int r) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("pixel_shuffle expects {C,H,W}");
    const int Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    if (Cin % (r * r) != 0) throw ShapeError("pixel_shuffle channels not divisible by r*r");
    const int C = Cin / (r * r);
    Tensor out({C, H * r, W * r});
    for (int c = 0; c < C; ++c)
        for (int di = 0; di < r; ++di)
            for (int dj = 0; dj < r; ++dj) {
                const int ci = c * r * r + di * r + dj;
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j)
                        out.at(c, i * r + di, j * r + dj) = xv.at(ci, i, j);
            }
    auto n = make_node(std::move(out), {x}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, x, r, C, H, W] {
            Tensor gx(x->value.shape);
            for (int c = 0; c < C; ++c)
                for (int di = 0; di < r; ++di)
                    for (int dj = 0; dj < r; ++dj) {
                        const int ci = c * r * r + di * r + dj;
                        for (int i = 0; i < H; ++i)
                            for (int j = 0; j < W; ++j)
                                gx.at(ci, i, j) = self->grad.at(c, i * r + di, j * r + dj);
                    }
            x->accum_grad(gx);
        };
    return n;
}

Var nn_upsample(const Var& x, int k) {
    if (k < 1) throw ParamError("upsample factor must be >= 1");
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("nn_upsample expects {C,H,W}");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    Tensor out({C, H * k, W * k});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H * k; ++i)
            for (int j = 0; j < W * k; ++j)
                out.at(c, i, j) = xv.at(c, i / k, j / k);
    auto n = make_node(std::move(out), {x}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, x, k, C, H, W] {
            Tensor gx(x->value.shape);
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < H * k; ++i)
                    for (int j = 0; j < W * k; ++j)
                        gx.at(c, i / k, j / k) += self->grad.at(c, i, j);
            x->accum_grad(gx);
        };
    return n;
}

Var avg_pool(const Var& x, int k) {
    if (k < 1) throw ParamError("pool factor must be >= 1");
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw ShapeError("avg_pool expects {C,H,W}");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    if (H % k != 0 || W % k != 0)
        throw ShapeError("avg_pool dims " + xv.shape_str() + " not divisible by " + std::to_string(k));
    const int ho = H / k, wo = W / k;
    const double inv = 1.0 / (k * k);
    Tensor out({C, ho, wo});
    for (int c = 0; c < C; ++c)
        for (int oi = 0; oi < ho; ++oi)
            for (int oj = 0; oj < wo; ++oj) {
                double s = 0.0;
                for (int di = 0; di < k; ++di)
                    for (int dj = 0; dj < k; ++dj) s += xv.at(c, oi * k + di, oj * k + dj);
                out.at(c, oi, oj) = s * inv;
            }
    auto n = make_node(std::move(out), {x}, nullptr);
    Node* self = n.get();
    if (n->requires_grad)
        n->backprop = [self, x, k, C, ho, wo, inv] {
            Tensor gx(x->value.shape);
            for (int c = 0; c < C; ++c)
                for (int oi = 0; oi < ho; ++oi)
                    for (int oj = 0; oj < wo; ++oj) {
                        const double g = self->grad.at(c, oi, oj) * inv;
                        for (int di = 0; di < k; ++di)
                            for (int dj = 0; dj < k; ++dj)
                                gx.at(c, oi * k + di, oj * k + dj) += g;
                    }
            x->accum_grad(gx);
        };
    return n;
}

} // namespace mmsr::ag
