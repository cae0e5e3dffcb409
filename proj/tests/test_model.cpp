#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hppnet/loss.hpp"
#include "hppnet/model.hpp"
#include "oracles.hpp"

using namespace hppnet;

namespace {

ModelConfig micro(Variant v = Variant::Base) {
    ModelConfig c = ModelConfig::for_variant(v);
    c.variant = v;
    c.channels = 4;
    c.lstm_units = 3;
    c.conv_stack_filters = 2;
    c.block_count = 2;
    return c;
}

template <typename S>
Tensor<S> random_input(uint64_t seed, int64_t b, int64_t t) {
    Rng rng(seed);
    return test::random_tensor<S>(rng, {b, 1, t, 352}, -5.0, 0.0);
}

template <typename S>
TargetBatch<S> random_targets(uint64_t seed, int64_t b, int64_t t) {
    Rng rng(seed);
    TargetBatch<S> tb;
    auto fill = [&](double p) {
        std::vector<S> v(b * t * 88);
        for (auto& x : v) x = rng.uniform() < p ? S(1) : S(0);
        return Tensor<S>::from({b, t, 88}, std::move(v));
    };
    tb.n = fill(0.05);
    tb.f = fill(0.2);
    tb.o = fill(0.05);
    std::vector<S> vel(b * t * 88);
    for (int64_t i = 0; i < b * t * 88; ++i) vel[i] = tb.n.data()[i] > 0 ? S(rng.range(0.3, 1.0)) : S(0);
    tb.v = Tensor<S>::from({b, t, 88}, std::move(vel));
    return tb;
}

} // namespace

TEST_CASE("head output shapes and range") {
    HppNet<float> model(ModelConfig::for_variant(Variant::Tiny), 1);
    auto out = model.forward(random_input<float>(2, 1, 6));
    for (const auto* h : {&out.onset, &out.frame, &out.offset, &out.velocity}) {
        CHECK(h->shape() == Shape{1, 6, 88});
        for (int64_t i = 0; i < h->size(); ++i) {
            CHECK(h->data()[i] > 0.0f);
            CHECK(h->data()[i] < 1.0f);
        }
    }
}

TEST_CASE("zero weights give 0.5 posteriors") {
    HppNet<float> model(micro(), 1);
    for (auto& p : model.parameters())
        std::fill(p.tensor.node()->value.begin(), p.tensor.node()->value.end(), 0.0f);
    auto out = model.forward(random_input<float>(3, 1, 4));
    for (int64_t i = 0; i < out.frame.size(); ++i)
        CHECK(out.frame.data()[i] == doctest::Approx(0.5f));
}

TEST_CASE("same seed gives identical parameters and outputs") {
    HppNet<float> a(micro(), 77), b(micro(), 77);
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(pa[i].tensor.node()->value == pb[i].tensor.node()->value);
    }
    auto in = random_input<float>(5, 1, 4);
    auto oa = a.forward(in), ob = b.forward(in);
    CHECK(oa.onset.node()->value == ob.onset.node()->value);
    CHECK(oa.velocity.node()->value == ob.velocity.node()->value);

    HppNet<float> c(micro(), 78);
    auto oc = c.forward(in);
    CHECK(oc.onset.node()->value != oa.onset.node()->value);
}

TEST_CASE("FG-LSTM head treats key columns independently with shared weights") {
    Rng rng(9);
    FgLstmHead<double> head;
    head.init(4, 3, rng);
    // two identical key columns must produce identical outputs
    auto col = test::random_tensor<double>(rng, {1, 4, 5, 1});
    std::vector<double> two(2 * 4 * 5);
    for (int c = 0; c < 4; ++c)
        for (int t = 0; t < 5; ++t)
            for (int k = 0; k < 2; ++k)
                two[(c * 5 + t) * 2 + k] = col.data()[c * 5 + t];
    auto out = head.forward(Tensor<double>::from({1, 4, 5, 2}, std::move(two)));
    for (int t = 0; t < 5; ++t)
        CHECK(out.data()[t * 2] == doctest::Approx(out.data()[t * 2 + 1]));

    SUBCASE("perturbing one column leaves the other unchanged") {
        std::vector<double> mixed(2 * 4 * 5);
        for (int c = 0; c < 4; ++c)
            for (int t = 0; t < 5; ++t) {
                mixed[(c * 5 + t) * 2 + 0] = col.data()[c * 5 + t];
                mixed[(c * 5 + t) * 2 + 1] = col.data()[c * 5 + t] + 1.0;
            }
        auto out2 = head.forward(Tensor<double>::from({1, 4, 5, 2}, std::move(mixed)));
        for (int t = 0; t < 5; ++t)
            CHECK(out2.data()[t * 2] == doctest::Approx(out.data()[t * 2]));
    }
}

TEST_CASE("sp variant detach topology") {
    HppNet<double> model(micro(Variant::Sp), 3);
    auto input = random_input<double>(4, 1, 4);
    auto targets = random_targets<double>(5, 1, 4);

    SUBCASE("frame/offset/velocity losses do not reach the onset acoustic model") {
        auto out = model.forward(input);
        auto rest_loss = add(scale(bce_sum(out.frame, targets.f, 1.0), 1.0),
                             add(scale(bce_sum(out.offset, targets.o, 1.0), 1.0),
                                 masked_sq_sum(out.velocity, targets.v, targets.n)));
        backward(rest_loss);
        for (auto& p : model.parameters()) {
            if (p.name.rfind("onset_acoustic", 0) == 0) {
                if (p.tensor.has_grad())
                    for (double g : p.tensor.grad()) CHECK(g == 0.0);
            }
        }
    }
    SUBCASE("onset loss does not reach the second acoustic model") {
        auto out = model.forward(input);
        backward(bce_sum(out.onset, targets.n, 2.0));
        bool onset_path_touched = false;
        for (auto& p : model.parameters()) {
            const bool has = p.tensor.has_grad() &&
                std::any_of(p.tensor.grad().begin(), p.tensor.grad().end(), [](double g) { return g != 0.0; });
            if (p.name.rfind("rest_acoustic", 0) == 0) CHECK_FALSE(has);
            if (p.name.rfind("onset_acoustic", 0) == 0 && has) onset_path_touched = true;
        }
        CHECK(onset_path_touched);
    }
}

TEST_CASE("micro model end-to-end gradient check") {
    HppNet<double> model(micro(), 11);
    auto input = random_input<double>(12, 1, 6);
    auto targets = random_targets<double>(13, 1, 6);
    auto params = model.parameters();
    auto r = test::grad_check(params, [&] {
        return total_loss(model.forward(input), targets).total;
    }, 1e-5, 3);
    INFO("worst parameter: " << r.worst_param);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("parameter counts and orderings") {
    HppNet<float> tiny(ModelConfig::for_variant(Variant::Tiny), 0);
    HppNet<float> base(ModelConfig::for_variant(Variant::Base), 0);
    HppNet<float> sp(ModelConfig::for_variant(Variant::Sp), 0);
    const auto nt = tiny.parameter_count(), nb = base.parameter_count(), ns = sp.parameter_count();
    CHECK(nt < 400'000);
    CHECK(nb < 2'000'000);
    CHECK(ns > nb);
    CHECK(nt < nb);
}

TEST_CASE("config validation and persistence") {
    auto cfg = ModelConfig::for_variant(Variant::Sp);
    cfg.save("model.cfg");
    auto back = ModelConfig::load("model.cfg");
    CHECK(back.variant == Variant::Sp);
    CHECK(back.channels == cfg.channels);
    CHECK(back.lstm_units == cfg.lstm_units);
    CHECK(back.hd_dilations == cfg.hd_dilations);
    CHECK(back.block_dilation_f == 12);

    ModelConfig bad;
    bad.hd_dilations = {200};
    CHECK_THROWS_AS(bad.validate(), DimensionError);

    HppNet<float> model(micro(), 1);
    CHECK_THROWS_AS(model.forward(Tensor<float>::zeros({1, 1, 4, 100})), DimensionError);
}
