#include "doctest.h"

#include <cmath>

#include "mmsr/loss.hpp"

using namespace mmsr;

namespace {

ImagePatch random_patch(int h, int w, Rng& rng) {
    ImagePatch p(h, w);
    for (auto& v : p.data) v = rng.next_uniform(-1.0, 1.0);
    return p;
}

ImagePatch filled(int h, int w, double v) { return ImagePatch(h, w, v); }

// central finite difference of a scalar functional wrt one input pixel
template <typename F>
double fd_grad(F f, ImagePatch p, int idx, double h = 1e-3) {
    const double v = p.data[static_cast<size_t>(idx)];
    p.data[static_cast<size_t>(idx)] = v + h;
    const double fp = f(p);
    p.data[static_cast<size_t>(idx)] = v - h;
    const double fm = f(p);
    return (fp - fm) / (2.0 * h);
}

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

} // namespace

TEST_SUITE("loss") {

TEST_CASE("patch stats on constant and hand-computed inputs") {
    auto s = patch_stats(filled(4, 4, 0.5), filled(4, 4, 0.5));
    CHECK(s.mu_x == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.mu_y == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.var_x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.var_y == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.cov_xy == doctest::Approx(0.0).epsilon(1e-9));

    ImagePatch x(2, 2), y(2, 2);
    x.at(0, 0) = 0; x.at(0, 1) = 1; x.at(1, 0) = 0; x.at(1, 1) = 1;
    y.at(0, 0) = 0; y.at(0, 1) = 0; y.at(1, 0) = 1; y.at(1, 1) = 1;
    auto t = patch_stats(x, y);
    CHECK(t.mu_x == doctest::Approx(0.5));
    CHECK(t.mu_y == doctest::Approx(0.5));
    CHECK(t.var_x == doctest::Approx(0.25));
    CHECK(t.var_y == doctest::Approx(0.25));
    CHECK(t.cov_xy == doctest::Approx(0.0));

    Rng rng(3);
    auto p = random_patch(6, 6, rng);
    auto u = patch_stats(p, p);
    CHECK(u.var_x == doctest::Approx(u.cov_xy).epsilon(1e-12));
    CHECK(u.var_y == doctest::Approx(u.cov_xy).epsilon(1e-12));
}

TEST_CASE("structure term: zero-mean identity, all-ones value, symmetry") {
    SSIMParams p;
    ImagePatch z(4, 4);
    // zero-mean x = y
    z.at(0, 0) = 0.5; z.at(0, 1) = -0.5; z.at(1, 0) = 0.3; z.at(1, 1) = -0.3;
    CHECK(ssim_loss(z, z, p) == doctest::Approx(0.0).epsilon(1e-12));

    const double v = ssim_loss(filled(8, 8, 1.0), filled(8, 8, 1.0), p);
    CHECK(std::abs(v - (1.0 - 1.02 / 2.02)) < 1e-6);
    CHECK(v == doctest::Approx(0.4950495049504951).epsilon(1e-9));
    // the conventional numerator restores zero at identity
    CHECK(ssim_loss(filled(8, 8, 1.0), filled(8, 8, 1.0), p, SsimForm::standard) ==
          doctest::Approx(0.0).epsilon(1e-9));

    Rng rng(11);
    auto a = random_patch(8, 8, rng);
    auto b = random_patch(8, 8, rng);
    CHECK(ssim_loss(a, b, p) == doctest::Approx(ssim_loss(b, a, p)).epsilon(1e-12));
    CHECK(ssim_loss(a, b, p) >= 0.0);
}

TEST_CASE("nn upsample g") {
    ImagePatch one(1, 1);
    one.at(0, 0) = 0.7;
    auto up = nn_upsample_g(one, 8);
    CHECK(up.height == 8);
    CHECK(up.width == 8);
    for (double v : up.data) CHECK(v == doctest::Approx(0.7));

    ImagePatch q(2, 2);
    q.at(0, 0) = 1; q.at(0, 1) = 2; q.at(1, 0) = 3; q.at(1, 1) = 4;
    auto u2 = nn_upsample_g(q, 2);
    CHECK(u2.height == 4);
    CHECK(u2.at(0, 0) == 1);
    CHECK(u2.at(1, 1) == 1);
    CHECK(u2.at(0, 2) == 2);
    CHECK(u2.at(2, 0) == 3);
    CHECK(u2.at(3, 3) == 4);

    auto id = nn_upsample_g(q, 1);
    CHECK(id.data == q.data);
}

TEST_CASE("avg downsample f") {
    auto d = avg_downsample_f(filled(8, 8, 0.3), 8);
    CHECK(d.height == 1);
    CHECK(d.at(0, 0) == doctest::Approx(0.3));

    ImagePatch q(2, 2);
    q.at(0, 0) = 0; q.at(0, 1) = 2; q.at(1, 0) = 4; q.at(1, 1) = 6;
    CHECK(avg_downsample_f(q, 2).at(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("rescale identity: f(g(p,8),8) = p over 100 random patches") {
    Rng rng(99);
    for (int t = 0; t < 100; ++t) {
        auto p = random_patch(4 + static_cast<int>(rng.next_index(5)),
                              4 + static_cast<int>(rng.next_index(5)), rng);
        auto back = avg_downsample_f(nn_upsample_g(p, 8), 8);
        REQUIRE(back.height == p.height);
        for (int i = 0; i < p.size(); ++i)
            CHECK(std::abs(back.data[static_cast<size_t>(i)] -
                           p.data[static_cast<size_t>(i)]) < 1e-6);
    }
}

TEST_CASE("mse examples") {
    Rng rng(5);
    auto a = random_patch(4, 4, rng);
    CHECK(mse(a, a) == doctest::Approx(0.0));
    CHECK(mse(filled(3, 3, 0.0), filled(3, 3, 1.0)) == doctest::Approx(1.0));
    ImagePatch z(2, 2), b(2, 2);
    b.at(0, 0) = 1; b.at(0, 1) = 2; b.at(1, 0) = 3; b.at(1, 1) = 4;
    CHECK(mse(z, b) == doctest::Approx(7.5));
}

TEST_CASE("upsample loss U") {
    CHECK(upsample_loss_U(filled(16, 16, 0.2), filled(2, 2, 0.2)) == doctest::Approx(0.0));
    Rng rng(7);
    auto q = random_patch(3, 3, rng);
    CHECK(upsample_loss_U(nn_upsample_g(q, 8), q) == doctest::Approx(0.0));
    CHECK(upsample_loss_U(filled(8, 8, 1.0), filled(1, 1, 0.0)) == doctest::Approx(1.0));
}

TEST_CASE("downsample loss D") {
    Rng rng(13);
    auto x = random_patch(2, 2, rng);
    CHECK(downsample_loss_D(x, nn_upsample_g(x, 8)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(downsample_loss_D(filled(1, 1, 0.0), filled(8, 8, 1.0)) == doctest::Approx(1.0));
    // pooling sees only block means
    ImagePatch one(1, 1);
    one.at(0, 0) = 1.0;
    ImagePatch sr(8, 8, 1.0);
    sr.at(0, 0) = 0.0;
    sr.at(0, 1) = 2.0;
    CHECK(downsample_loss_D(one, sr) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("combined total") {
    LossWeights w;
    auto lb = combine_breakdown(1.0, 0.1, 0.2, 0.3, 0.4, w);
    CHECK(lb.total == doctest::Approx(2.1).epsilon(1e-12));
    CHECK(lb.orig == doctest::Approx(1.0));

    LossWeights zero = w;
    zero.lambda1 = zero.lambda2 = zero.lambda3 = zero.lambda4 = 0.0;
    CHECK(combine_breakdown(0.37, 0.5, 0.5, 0.5, 0.5, zero).total == doctest::Approx(0.37));

    // all four generated images are the g/f images of zero-mean inputs
    Rng rng(17);
    ImagePatch x = random_patch(4, 4, rng);
    double mu = 0;
    for (double v : x.data) mu += v;
    mu /= x.size();
    for (auto& v : x.data) v -= mu;
    ImagePatch y = nn_upsample_g(x, 8); // zero-mean too
    auto lb2 = mmsr_total(0.75, x, nn_upsample_g(x, 8), y, avg_downsample_f(y, 8), w,
                          SSIMParams{});
    CHECK(lb2.total == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("differentiable forwards agree with the pure kernels") {
    Rng rng(23);
    SSIMParams p;
    auto x = random_patch(8, 8, rng);
    auto y = random_patch(8, 8, rng);
    auto vx = mmsr::ag::constant(x.to_chw());
    auto vy = mmsr::ag::constant(y.to_chw());
    CHECK(mmsr::ag::ssim_loss(vx, vy, p)->value[0] ==
          doctest::Approx(ssim_loss(x, y, p)).epsilon(1e-12));
    CHECK(mmsr::ag::mse_loss(vx, vy)->value[0] == doctest::Approx(mse(x, y)).epsilon(1e-12));

    auto hr = random_patch(32, 32, rng);
    auto lr = random_patch(4, 4, rng);
    CHECK(mmsr::ag::upsample_loss(mmsr::ag::constant(hr.to_chw()),
                                  mmsr::ag::constant(lr.to_chw()))->value[0] ==
          doctest::Approx(upsample_loss_U(hr, lr)).epsilon(1e-12));
    CHECK(mmsr::ag::downsample_loss(mmsr::ag::constant(lr.to_chw()),
                                    mmsr::ag::constant(hr.to_chw()))->value[0] ==
          doctest::Approx(downsample_loss_D(lr, hr)).epsilon(1e-12));
}

TEST_CASE("gradient check against central differences") {
    Rng rng(31);
    SSIMParams p;
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_patch(8, 8, rng);
        auto y = random_patch(8, 8, rng);

        auto gx = mmsr::ag::leaf(x.to_chw(), true);
        auto gy = mmsr::ag::constant(y.to_chw());
        mmsr::ag::backward(mmsr::ag::ssim_loss(gx, gy, p));
        const int idx = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(x.size())));
        const double fd = fd_grad(
            [&](const ImagePatch& q) { return ssim_loss(q, y, p); }, x, idx);
        CHECK(rel_err(gx->grad[idx], fd) < 1e-4);

        // L_D wrt the SR image
        auto x_sr = random_patch(64, 64, rng);
        auto g_sr = mmsr::ag::leaf(x_sr.to_chw(), true);
        mmsr::ag::backward(mmsr::ag::downsample_loss(mmsr::ag::constant(x.to_chw()), g_sr));
        const int j = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(x_sr.size())));
        const double fd_d = fd_grad(
            [&](const ImagePatch& q) { return downsample_loss_D(x, q); }, x_sr, j);
        CHECK(rel_err(g_sr->grad[j], fd_d) < 1e-4);

        // L_U wrt the LR image
        auto y_hr = random_patch(64, 64, rng);
        auto y_lr = random_patch(8, 8, rng);
        auto g_lr = mmsr::ag::leaf(y_lr.to_chw(), true);
        mmsr::ag::backward(mmsr::ag::upsample_loss(mmsr::ag::constant(y_hr.to_chw()), g_lr));
        const int k = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(y_lr.size())));
        const double fd_u = fd_grad(
            [&](const ImagePatch& q) { return upsample_loss_U(y_hr, q); }, y_lr, k);
        CHECK(rel_err(g_lr->grad[k], fd_u) < 1e-4);
    }
}

TEST_CASE("gradient check of the weighted total wrt the SR image") {
    Rng rng(41);
    SSIMParams p;
    LossWeights w;
    auto x = random_patch(8, 8, rng);
    auto y = random_patch(64, 64, rng);
    auto y_lr = random_patch(8, 8, rng);
    auto x_sr = random_patch(64, 64, rng);

    auto g_sr = mmsr::ag::leaf(x_sr.to_chw(), true);
    auto terms = mmsr::ag::mmsr_terms(mmsr::ag::constant(x.to_chw()), g_sr,
                                      mmsr::ag::constant(y.to_chw()),
                                      mmsr::ag::constant(y_lr.to_chw()), p);
    mmsr::ag::backward(
        mmsr::ag::mmsr_weighted(mmsr::ag::constant(Tensor::scalar(0.0)), terms, w));
    for (int t = 0; t < 20; ++t) {
        const int idx = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(x_sr.size())));
        const double fd = fd_grad(
            [&](const ImagePatch& q) {
                return mmsr_total(0.0, x, q, y, y_lr, w, p).total;
            },
            x_sr, idx);
        CHECK(rel_err(g_sr->grad[idx], fd) < 1e-4);
    }
}

TEST_CASE("shape and parameter validation") {
    CHECK_THROWS_AS(ssim_loss(filled(4, 4, 0.0), filled(4, 5, 0.0), SSIMParams{}), ShapeError);
    CHECK_THROWS_AS(nn_upsample_g(filled(2, 2, 0.0), 0), ParamError);
    CHECK_THROWS_AS(avg_downsample_f(filled(5, 5, 0.0), 2), ShapeError);
    SSIMParams bad;
    bad.C1 = 0.0;
    CHECK_THROWS_AS(bad.validate(), ParamError);
}

} // TEST_SUITE
