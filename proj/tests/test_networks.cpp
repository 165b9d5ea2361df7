#include "doctest.h"

#include <cmath>

#include "mmsr/networks.hpp"

using namespace mmsr;

// regression pins for the small specs below, counted from the
// constructed networks
#define MMSR_PIN_SR_PARAMS 8361u
#define MMSR_PIN_DOWN_PARAMS 3153u
#define MMSR_PIN_DISC_PARAMS 11033u

namespace {

SRGeneratorSpec small_sr() {
    SRGeneratorSpec s;
    s.base_width = 8;
    s.n_res_blocks = 1;
    return s;
}

DownGeneratorSpec small_down() {
    DownGeneratorSpec s;
    s.base_width = 8;
    s.n_res_blocks = 1;
    return s;
}

DiscriminatorSpec small_disc() {
    DiscriminatorSpec s;
    s.base_width = 8;
    s.n_layers = 3;
    return s;
}

} // namespace

TEST_SUITE("networks") {

TEST_CASE("SR generator shape law and bounded output") {
    SRGenerator g(small_sr(), 1);
    for (int hw : {8, 16, 32, 64}) {
        Tensor out = g.infer(Tensor({1, hw, hw}));
        REQUIRE(out.shape == std::vector<int>{1, 8 * hw, 8 * hw});
        for (double v : out.data) {
            CHECK(std::isfinite(v));
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
    Tensor rect = g.infer(Tensor({1, 8, 16}));
    CHECK(rect.shape == std::vector<int>{1, 64, 128});
}

TEST_CASE("down generator inverts the shape law") {
    DownGenerator g(small_down(), 2);
    Tensor out = g.infer(Tensor({1, 64, 64}, 0.25));
    REQUIRE(out.shape == std::vector<int>{1, 8, 8});
    for (double v : out.data) {
        CHECK(std::isfinite(v));
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(g.infer(Tensor({1, 20, 20})), ShapeError);
}

TEST_CASE("discriminator emits a score grid") {
    Discriminator d(small_disc(), 3);
    Tensor hi = d.forward(mmsr::ag::constant(Tensor({1, 256, 256})))->value;
    REQUIRE(hi.rank() == 3);
    CHECK(hi.dim(1) >= 1);
    CHECK(hi.dim(2) >= 1);
    DiscriminatorSpec lr_spec = small_disc();
    lr_spec.n_layers = 2;
    Discriminator d_lr(lr_spec, 4);
    Tensor lo = d_lr.forward(mmsr::ag::constant(Tensor({1, 32, 32})))->value;
    CHECK(lo.dim(1) >= 1);
    CHECK(lo.dim(2) >= 1);
}

TEST_CASE("UNIT encoders share a latent shape, decoders invert") {
    UnitPair u(small_sr(), small_down(), 5);
    auto z_lr = u.encode_lr(mmsr::ag::constant(Tensor({1, 8, 8})));
    auto z_hr = u.encode_hr(mmsr::ag::constant(Tensor({1, 64, 64})));
    CHECK(z_lr->value.shape == z_hr->value.shape);
    CHECK(u.decode_lr(z_lr)->value.shape == std::vector<int>{1, 8, 8});
    CHECK(u.decode_hr(z_lr)->value.shape == std::vector<int>{1, 64, 64});
    CHECK(u.infer_sr(Tensor({1, 8, 8})).shape == std::vector<int>{1, 64, 64});
    CHECK(!u.latent_param_names().empty());
}

TEST_CASE("seed determinism") {
    SRGenerator a(small_sr(), 7), b(small_sr(), 7), c(small_sr(), 8);
    REQUIRE(a.params().size() == b.params().size());
    CHECK(a.param_checksum() == b.param_checksum());
    CHECK(a.param_checksum() != c.param_checksum());
    for (size_t i = 0; i < a.params().size(); ++i) {
        CHECK(a.params()[i].name == b.params()[i].name);
        CHECK(a.params()[i].var->value.data == b.params()[i].var->value.data);
    }
    DownGenerator da(small_down(), 7), db(small_down(), 7);
    CHECK(da.param_checksum() == db.param_checksum());
    Discriminator xa(small_disc(), 7), xb(small_disc(), 7);
    CHECK(xa.param_checksum() == xb.param_checksum());
}

TEST_CASE("parameter counts are pure functions of the spec") {
    CHECK(SRGenerator(small_sr(), 1).param_count() ==
          SRGenerator(small_sr(), 99).param_count());
    // pinned regression values for the small specs above
    CHECK(SRGenerator(small_sr(), 1).param_count() == MMSR_PIN_SR_PARAMS);
    CHECK(DownGenerator(small_down(), 1).param_count() == MMSR_PIN_DOWN_PARAMS);
    CHECK(Discriminator(small_disc(), 1).param_count() == MMSR_PIN_DISC_PARAMS);
}

TEST_CASE("bundle wiring per variant") {
    auto b = build_bundle(Variant::sr_cyclegan, small_sr(), small_down(), small_disc(),
                          small_disc(), 11);
    CHECK(b.g1);
    CHECK(b.g2);
    CHECK(!b.unit);
    CHECK(b.super_resolve(Tensor({1, 8, 8})).shape == std::vector<int>{1, 64, 64});
    CHECK(b.downscale(Tensor({1, 64, 64})).shape == std::vector<int>{1, 8, 8});
    CHECK(b.all_params().size() ==
          b.generator_params().size() + b.dx->params().size() + b.dy->params().size());

    auto u = build_bundle(Variant::sr_unit, small_sr(), small_down(), small_disc(),
                          small_disc(), 11);
    CHECK(u.unit);
    CHECK(u.super_resolve(Tensor({1, 8, 8})).shape == std::vector<int>{1, 64, 64});

    CHECK(variant_from_name("sr-cyclegan") == Variant::sr_cyclegan);
    CHECK(variant_from_name(variant_name(Variant::sr_unit)) == Variant::sr_unit);
    CHECK_THROWS_AS(variant_from_name("bogus"), ParamError);
}

} // TEST_SUITE
