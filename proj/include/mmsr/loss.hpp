#pragma once

#include "mmsr/autograd.hpp"
#include "mmsr/tensor.hpp"

namespace mmsr {

// Constants of the SSIM-style structure term. C1/C2 are absolute values
// on the [-1,1] normalized intensity scale.
struct SSIMParams {
    double N = 1.0;
    double C1 = 0.02;
    double C2 = 0.06;
    void validate() const;
};

// The structure term ships in two forms: the formulation this project
// trains with (mean product in the numerator) and the conventional SSIM
// numerator (doubled mean product) used for reporting.
enum class SsimForm { as_trained, standard };

struct LossWeights {
    double lambda1 = 2.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double lambda4 = 1.0;
    double w_adv = 1.0;
    double w_cyc = 10.0;
    double w_idt = 0.0;
    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double orig = 0.0;
    double s_x = 0.0;    // unweighted structure term, LR domain
    double s_y = 0.0;    // unweighted structure term, HR domain
    double d_term = 0.0; // unweighted downsample-consistency MSE
    double u_term = 0.0; // unweighted upsample-consistency MSE
};

struct PatchStats {
    double mu_x, mu_y, var_x, var_y, cov_xy;
};

// Population moments over all pixels of two same-shape patches.
PatchStats patch_stats(const ImagePatch& x, const ImagePatch& y);

double ssim_loss(const ImagePatch& x, const ImagePatch& y, const SSIMParams& p,
                 SsimForm form = SsimForm::as_trained);

// Each input pixel replicated over a factor x factor block.
ImagePatch nn_upsample_g(const ImagePatch& y_lr, int factor);

// Each output pixel is the mean of its factor x factor source block.
ImagePatch avg_downsample_f(const ImagePatch& x_hr, int factor);

double mse(const ImagePatch& a, const ImagePatch& b);

// MSE(y, g(y_lr)) with y at 8x the size of y_lr.
double upsample_loss_U(const ImagePatch& y, const ImagePatch& y_lr);

// MSE(x, f(x_sr)) with x_sr at 8x the size of x.
double downsample_loss_D(const ImagePatch& x, const ImagePatch& x_sr);

// total = orig + l1*s_x + l2*s_y + l3*d + l4*u; breakdown stores the
// unweighted term values.
LossBreakdown combine_breakdown(double orig, double s_x, double s_y, double d_term,
                                double u_term, const LossWeights& w);

LossBreakdown mmsr_total(double orig, const ImagePatch& x, const ImagePatch& x_sr,
                         const ImagePatch& y, const ImagePatch& y_lr,
                         const LossWeights& w, const SSIMParams& p,
                         SsimForm form = SsimForm::as_trained);

namespace ag {

// Differentiable versions used in training; forward values agree with
// the pure functions above to machine precision.
Var ssim_loss(const Var& x, const Var& y, const SSIMParams& p,
              SsimForm form = SsimForm::as_trained);
Var mse_loss(const Var& a, const Var& b);
Var l1_loss(const Var& a, const Var& b);
Var upsample_loss(const Var& y, const Var& y_lr, int factor = 8);
Var downsample_loss(const Var& x, const Var& x_sr, int factor = 8);

struct MmsrTerms {
    Var s_x, s_y, d_term, u_term;
};

// x {1,h,w}, x_sr {1,8h,8w}, y {1,8h,8w}, y_lr {1,h,w}
MmsrTerms mmsr_terms(const Var& x, const Var& x_sr, const Var& y, const Var& y_lr,
                     const SSIMParams& p, SsimForm form = SsimForm::as_trained);

// orig + weighted sum of the four terms
Var mmsr_weighted(const Var& orig, const MmsrTerms& t, const LossWeights& w);

} // namespace ag
} // namespace mmsr
