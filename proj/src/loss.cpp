#include "mmsr/loss.hpp"

#include <cmath>
#include <string>

namespace mmsr {

namespace {
void check_same(const ImagePatch& a, const ImagePatch& b, const char* op) {
    if (a.height != b.height || a.width != b.width)
        throw ShapeError(std::string(op) + ": (" + std::to_string(a.height) + "," +
                         std::to_string(a.width) + ") vs (" + std::to_string(b.height) + "," +
                         std::to_string(b.width) + ")");
    if (a.size() == 0) throw ShapeError(std::string(op) + ": empty patch");
}
} // namespace

void SSIMParams::validate() const {
    if (!(N > 0.0) || !(C1 > 0.0) || !(C2 > 0.0))
        throw ParamError("SSIM constants must be positive");
}

void LossWeights::validate() const {
    const double ws[] = {lambda1, lambda2, lambda3, lambda4, w_adv, w_cyc, w_idt};
    for (double v : ws)
        if (v < 0.0 || !std::isfinite(v)) throw ParamError("loss weights must be >= 0 and finite");
}

PatchStats patch_stats(const ImagePatch& x, const ImagePatch& y) {
    check_same(x, y, "patch_stats");
    const int n = x.size();
    double sx = 0, sy = 0;
    for (int i = 0; i < n; ++i) {
        sx += x.data[i];
        sy += y.data[i];
    }
    const double mu_x = sx / n, mu_y = sy / n;
    double vx = 0, vy = 0, cxy = 0;
    for (int i = 0; i < n; ++i) {
        const double dx = x.data[i] - mu_x, dy = y.data[i] - mu_y;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    // population convention
    return {mu_x, mu_y, vx / n, vy / n, cxy / n};
}

double ssim_loss(const ImagePatch& x, const ImagePatch& y, const SSIMParams& p, SsimForm form) {
    p.validate();
    const PatchStats s = patch_stats(x, y);
    const double mean_prod = form == SsimForm::as_trained ? s.mu_x * s.mu_y : 2.0 * s.mu_x * s.mu_y;
    const double num = (mean_prod + p.C1) * (2.0 * s.cov_xy + p.C2);
    const double den = (s.mu_x * s.mu_x + s.mu_y * s.mu_y + p.C1) * (s.var_x + s.var_y + p.C2);
    return (1.0 - num / den) / p.N;
}

ImagePatch nn_upsample_g(const ImagePatch& y_lr, int factor) {
    if (factor < 1) throw ParamError("upsample factor must be >= 1");
    ImagePatch out(y_lr.height * factor, y_lr.width * factor);
    for (int i = 0; i < out.height; ++i)
        for (int j = 0; j < out.width; ++j) out.at(i, j) = y_lr.at(i / factor, j / factor);
    return out;
}

ImagePatch avg_downsample_f(const ImagePatch& x_hr, int factor) {
    if (factor < 1) throw ParamError("downsample factor must be >= 1");
    if (x_hr.height % factor != 0 || x_hr.width % factor != 0)
        throw ShapeError("patch dims not divisible by downsample factor");
    ImagePatch out(x_hr.height / factor, x_hr.width / factor);
    const double inv = 1.0 / (factor * factor);
    for (int oi = 0; oi < out.height; ++oi)
        for (int oj = 0; oj < out.width; ++oj) {
            double s = 0;
            for (int di = 0; di < factor; ++di)
                for (int dj = 0; dj < factor; ++dj) s += x_hr.at(oi * factor + di, oj * factor + dj);
            out.at(oi, oj) = s * inv;
        }
    return out;
}

double mse(const ImagePatch& a, const ImagePatch& b) {
    check_same(a, b, "mse");
    double s = 0;
    for (int i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / a.size();
}

double upsample_loss_U(const ImagePatch& y, const ImagePatch& y_lr) {
    if (y.height != 8 * y_lr.height || y.width != 8 * y_lr.width)
        throw ShapeError("upsample_loss_U expects y dims = 8 x y_lr dims");
    return mse(y, nn_upsample_g(y_lr, 8));
}

double downsample_loss_D(const ImagePatch& x, const ImagePatch& x_sr) {
    if (x_sr.height != 8 * x.height || x_sr.width != 8 * x.width)
        throw ShapeError("downsample_loss_D expects x_sr dims = 8 x x dims");
    return mse(x, avg_downsample_f(x_sr, 8));
}

LossBreakdown combine_breakdown(double orig, double s_x, double s_y, double d_term,
                                double u_term, const LossWeights& w) {
    LossBreakdown b;
    b.orig = orig;
    b.s_x = s_x;
    b.s_y = s_y;
    b.d_term = d_term;
    b.u_term = u_term;
    b.total = orig + w.lambda1 * s_x + w.lambda2 * s_y + w.lambda3 * d_term + w.lambda4 * u_term;
    return b;
}

LossBreakdown mmsr_total(double orig, const ImagePatch& x, const ImagePatch& x_sr,
                         const ImagePatch& y, const ImagePatch& y_lr,
                         const LossWeights& w, const SSIMParams& p, SsimForm form) {
    w.validate();
    const double s_x = ssim_loss(x, avg_downsample_f(x_sr, 8), p, form);
    const double s_y = ssim_loss(y, nn_upsample_g(y_lr, 8), p, form);
    const double d = downsample_loss_D(x, x_sr);
    const double u = upsample_loss_U(y, y_lr);
    return combine_breakdown(orig, s_x, s_y, d, u, w);
}

namespace ag {

Var ssim_loss(const Var& x, const Var& y, const SSIMParams& p, SsimForm form) {
    p.validate();
    if (!x->value.same_shape(y->value))
        throw ShapeError("ssim_loss: " + x->value.shape_str() + " vs " + y->value.shape_str());
    Var mu_x = mean_all(x);
    Var mu_y = mean_all(y);
    Var var_x = sub(mean_all(mul(x, x)), mul(mu_x, mu_x));
    Var var_y = sub(mean_all(mul(y, y)), mul(mu_y, mu_y));
    Var cov = sub(mean_all(mul(x, y)), mul(mu_x, mu_y));
    Var mean_prod = mul(mu_x, mu_y);
    if (form == SsimForm::standard) mean_prod = mul_scalar(mean_prod, 2.0);
    Var num = mul(add_scalar(mean_prod, p.C1), add_scalar(mul_scalar(cov, 2.0), p.C2));
    Var den = mul(add_scalar(add(mul(mu_x, mu_x), mul(mu_y, mu_y)), p.C1),
                  add_scalar(add(var_x, var_y), p.C2));
    return mul_scalar(scalar_sub(1.0, div(num, den)), 1.0 / p.N);
}

Var mse_loss(const Var& a, const Var& b) {
    Var d = sub(a, b);
    return mean_all(mul(d, d));
}

Var l1_loss(const Var& a, const Var& b) { return mean_all(abs(sub(a, b))); }

Var upsample_loss(const Var& y, const Var& y_lr, int factor) {
    return mse_loss(y, nn_upsample(y_lr, factor));
}

Var downsample_loss(const Var& x, const Var& x_sr, int factor) {
    return mse_loss(x, avg_pool(x_sr, factor));
}

MmsrTerms mmsr_terms(const Var& x, const Var& x_sr, const Var& y, const Var& y_lr,
                     const SSIMParams& p, SsimForm form) {
    MmsrTerms t;
    t.s_x = ssim_loss(x, avg_pool(x_sr, 8), p, form);
    t.s_y = ssim_loss(y, nn_upsample(y_lr, 8), p, form);
    t.d_term = downsample_loss(x, x_sr, 8);
    t.u_term = upsample_loss(y, y_lr, 8);
    return t;
}

Var mmsr_weighted(const Var& orig, const MmsrTerms& t, const LossWeights& w) {
    Var s = add(orig, mul_scalar(t.s_x, w.lambda1));
    s = add(s, mul_scalar(t.s_y, w.lambda2));
    s = add(s, mul_scalar(t.d_term, w.lambda3));
    s = add(s, mul_scalar(t.u_term, w.lambda4));
    return s;
}

} // namespace ag
} // namespace mmsr
