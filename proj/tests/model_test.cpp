#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "foct/kernels.hpp"
#include "foct/losses.hpp"
#include "foct/model.hpp"
#include "test_util.hpp"

using namespace foct;
using namespace foct::testutil;

namespace {

// Small double-precision model for gradient checks: every test below runs on
// the serial reference kernels.
ModelConfig tiny_config() {
    ModelConfig mc;
    mc.in_channels = 2;
    mc.num_classes = 2;
    mc.base_width = 2;
    mc.depth = 2;
    mc.double_until = 2;
    return mc;
}

struct SerialGuard {
    bool saved = kernels::parallel_enabled();
    SerialGuard() { kernels::set_parallel(false); }
    ~SerialGuard() { kernels::set_parallel(saved); }
};

long param_count(std::vector<ParamRef<double>> params) {
    long n = 0;
    for (auto& p : params) n += static_cast<long>(p.value->size());
    return n;
}

}  // namespace

TEST_CASE("model config: stage widths double then cap") {
    ModelConfig mc;  // base 8, depth 5, double_until 4
    CHECK(mc.width_at(1) == 8);
    CHECK(mc.width_at(2) == 16);
    CHECK(mc.width_at(3) == 32);
    CHECK(mc.width_at(4) == 64);
    CHECK(mc.width_at(5) == 64);
    CHECK(mc.dec_width_at(1) == 64);
    CHECK(mc.dec_width_at(2) == 32);
    CHECK(mc.dec_width_at(3) == 16);
    CHECK(mc.dec_width_at(4) == 8);
    CHECK(mc.dec_width_at(5) == 8);
}

TEST_CASE("encoder: activation shapes halve per depth") {
    SerialGuard sg;
    ModelConfig mc;
    Model<float> m(mc);
    m.init(0);
    Tensor<float> x(1, 3, 64, 64);
    Rng rng(9);
    fill_uniform(x, rng, 0.0, 1.0);
    EncoderPass<float> pass;
    m.encoder.forward(x, pass);
    for (int d = 1; d <= mc.depth; ++d) {
        const auto& a = pass.act(d);
        CHECK(a.c == mc.width_at(d));
        CHECK(a.h == 64 >> d);
        CHECK(a.w == 64 >> d);
    }
    CHECK(&pass.z_out() == &pass.act(mc.depth));

    Tensor<float> bad(1, 3, 60, 60);  // not divisible by 2^5
    EncoderPass<float> p2;
    CHECK_THROWS_AS(m.encoder.forward(bad, p2), std::invalid_argument);
    EncoderPass<float> p3;
    CHECK_THROWS_AS(m.encoder.forward_injected(x, 6, Tensor<float>(), p3), std::out_of_range);
    CHECK_THROWS_AS(m.encoder.forward_injected(x, 0, Tensor<float>(), p3), std::out_of_range);
}

TEST_CASE("decoder: probs are a softmax field over the input resolution") {
    SerialGuard sg;
    ModelConfig mc;
    Model<float> m(mc);
    m.init(1);
    Tensor<float> x(2, 3, 32, 32);
    Rng rng(10);
    fill_uniform(x, rng, 0.0, 1.0);
    EncoderPass<float> ep;
    m.encoder.forward(x, ep);
    DecoderPass<float> dp;
    m.dec_main.forward(ep.z_out(), dp);
    CHECK(dp.probs.n == 2);
    CHECK(dp.probs.c == mc.num_classes);
    CHECK(dp.probs.h == 32);
    CHECK(dp.probs.w == 32);
    CHECK(dp.num_taps() == mc.depth);
    for (int j = 1; j <= mc.depth; ++j) {
        CHECK(dp.tap(j).c == mc.dec_width_at(j));
        CHECK(dp.tap(j).h == 32 >> (mc.depth - j));
    }
    for (int in = 0; in < 2; ++in)
        for (int px = 0; px < 32 * 32; ++px) {
            float s = 0;
            for (int ch = 0; ch < mc.num_classes; ++ch) s += dp.probs.channel(in, ch)[px];
            CHECK(s == doctest::Approx(1.0f).epsilon(1e-4));
        }
}

TEST_CASE("model: parameter partition is prefixed, disjoint and complete") {
    Model<float> m(tiny_config());
    m.init(3);
    auto e = m.encoder_params();
    auto d = m.main_params();
    auto g = m.aux_params();
    auto all = m.all_params();
    CHECK(all.size() == e.size() + d.size() + g.size());
    std::set<std::string> names;
    for (auto& p : all) names.insert(p.name);
    CHECK(names.size() == all.size());  // unique names
    for (auto& p : e) CHECK(p.name.rfind("E/", 0) == 0);
    for (auto& p : d) CHECK(p.name.rfind("D/", 0) == 0);
    for (auto& p : g) CHECK(p.name.rfind("G/", 0) == 0);
    // decoders are structurally identical twins
    REQUIRE(d.size() == g.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i].shape == g[i].shape);
        CHECK(d[i].name.substr(1) == g[i].name.substr(1));
    }
    // and start as identical copies, so the two branches agree at step 0
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(*d[i].value == *g[i].value);
}

TEST_CASE("model: init is deterministic in the seed") {
    Model<float> a(tiny_config()), b(tiny_config()), c(tiny_config());
    a.init(11);
    b.init(11);
    c.init(12);
    auto pa = a.all_params(), pb = b.all_params(), pc = c.all_params();
    bool same_ab = true, same_ac = true;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (*pa[i].value != *pb[i].value) same_ab = false;
        if (*pa[i].value != *pc[i].value) same_ac = false;
    }
    CHECK(same_ab);
    CHECK_FALSE(same_ac);
}

TEST_CASE("encoder: injection perturbs exactly from the chosen depth on") {
    SerialGuard sg;
    Model<float> m(tiny_config());
    m.init(4);
    Tensor<float> x(1, 2, 16, 16);
    Rng rng(20);
    fill_uniform(x, rng, 0.0, 1.0);
    EncoderPass<float> clean, pert;
    m.encoder.forward(x, clean);
    const int d_inj = 1;
    const auto& ref = clean.act(d_inj);
    auto noise = perturb::sample_noise<float>(ref.n, ref.c, ref.h, ref.w, 77, 0.3);
    m.encoder.forward_injected(x, d_inj, noise, pert);

    // injected level equals clean * (1 + n)
    const auto& zc = clean.act(d_inj);
    const auto& zp = pert.act(d_inj);
    for (std::size_t i = 0; i < zc.size(); ++i)
        CHECK(zp.data[i] == doctest::Approx(zc.data[i] * (1.f + noise.data[i])).epsilon(1e-6));
    // deeper level differs (noise propagates)
    CHECK(max_abs_diff(clean.act(2), pert.act(2)) > 0);
    // zero noise is the identity
    EncoderPass<float> zero;
    m.encoder.forward_injected(x, d_inj, Tensor<float>(ref.n, ref.c, ref.h, ref.w, 0.f), zero);
    CHECK(max_abs_diff(clean.z_out(), zero.z_out()) == 0.0);
}

TEST_CASE("model: supervised gradients match finite differences") {
    SerialGuard sg;
    Model<double> m(tiny_config());
    m.init(5);
    CHECK(param_count(m.all_params()) <= 1000);
    Tensor<double> x(1, 2, 8, 8);
    Rng rng(30);
    fill_uniform(x, rng, 0.0, 1.0);
    MaskBatch labels(1, 8, 8);
    for (std::size_t i = 0; i < labels.data.size(); ++i)
        labels.data[i] = rng.uniform() < 0.4 ? 1 : 0;
    const double eta = 1.0;  // every pixel contributes

    auto objective = [&]() {
        EncoderPass<double> ep;
        m.encoder.forward(x, ep);
        DecoderPass<double> dp;
        m.dec_main.forward(ep.z_out(), dp);
        return bootstrapped_ce(dp.probs, labels, eta, false).loss;
    };

    m.zero_grad();
    EncoderPass<double> ep;
    m.encoder.forward(x, ep);
    DecoderPass<double> dp;
    m.dec_main.forward(ep.z_out(), dp);
    auto ce = bootstrapped_ce(dp.probs, labels, eta, true);
    Tensor<double> dz = m.dec_main.backward(dp, ce.dprobs, {});
    m.encoder.backward(ep, dz);

    const double hstep = 1e-5;
    int checked = 0, skipped = 0;
    for (auto& p : m.all_params()) {
        const bool is_aux = p.name.rfind("G/", 0) == 0;
        for (std::size_t i = 0; i < p.value->size(); i += 3) {
            const double an = (*p.grad)[i];
            if (is_aux) {
                CHECK(an == 0.0);  // aux decoder untouched by the supervised path
                continue;
            }
            const double orig = (*p.value)[i];
            (*p.value)[i] = orig + hstep;
            const double fp = objective();
            (*p.value)[i] = orig - hstep;
            const double fm = objective();
            (*p.value)[i] = orig;
            const double fd = (fp - fm) / (2 * hstep);
            if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) {
                ++skipped;  // dead relu region
                continue;
            }
            CHECK(rel_err(an, fd) < 1e-3);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("model: consistency gradients through injection match finite differences") {
    SerialGuard sg;
    Model<double> m(tiny_config());
    m.init(6);
    Tensor<double> x(1, 2, 8, 8);
    Rng rng(40);
    fill_uniform(x, rng, 0.0, 1.0);
    const int d_inj = 1;
    const double omega = 0.2;

    EncoderPass<double> probe;
    m.encoder.forward(x, probe);
    const auto& zs = probe.act(d_inj);
    auto noise = perturb::sample_noise<double>(zs.n, zs.c, zs.h, zs.w, 123, 0.3);

    // Constant targets from the clean main branch, captured once.
    DecoderPass<double> main_pass;
    m.dec_main.forward(probe.z_out(), main_pass);
    const Tensor<double> target_probs = main_pass.probs;
    std::vector<Tensor<double>> target_taps;
    for (int j = 1; j <= m.config().depth; ++j) target_taps.push_back(main_pass.tap(j));

    auto objective = [&]() {
        EncoderPass<double> ep;
        m.encoder.forward_injected(x, d_inj, noise, ep);
        DecoderPass<double> ap;
        m.dec_aux.forward(ep.z_out(), ap);
        double loss = output_consistency(target_probs, ap.probs, false).loss;
        std::vector<const Tensor<double>*> mt, at;
        for (int j = 1; j <= m.config().depth; ++j) {
            mt.push_back(&target_taps[j - 1]);
            at.push_back(&ap.tap(j));
        }
        loss += omega * feature_consistency(mt, at, false).loss;
        return loss;
    };

    m.zero_grad();
    EncoderPass<double> ep;
    m.encoder.forward_injected(x, d_inj, noise, ep);
    DecoderPass<double> ap;
    m.dec_aux.forward(ep.z_out(), ap);
    auto up = output_consistency(target_probs, ap.probs, true);
    std::vector<const Tensor<double>*> mt, at;
    for (int j = 1; j <= m.config().depth; ++j) {
        mt.push_back(&target_taps[j - 1]);
        at.push_back(&ap.tap(j));
    }
    auto uf = feature_consistency(mt, at, true);
    std::vector<Tensor<double>> dtaps;
    for (auto& g : uf.daux) {
        for (auto& v : g.data) v *= omega;
        dtaps.push_back(std::move(g));
    }
    Tensor<double> dz = m.dec_aux.backward(ap, up.daux, dtaps);
    m.encoder.backward(ep, dz);

    const double hstep = 1e-5;
    int checked = 0;
    for (auto& p : m.all_params()) {
        const bool frozen = p.name.rfind("D/", 0) == 0;  // targets are constants
        for (std::size_t i = 0; i < p.value->size(); i += 3) {
            const double an = (*p.grad)[i];
            if (frozen) {
                CHECK(an == 0.0);
                continue;
            }
            const double orig = (*p.value)[i];
            (*p.value)[i] = orig + hstep;
            const double fp = objective();
            (*p.value)[i] = orig - hstep;
            const double fm = objective();
            (*p.value)[i] = orig;
            const double fd = (fp - fm) / (2 * hstep);
            if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
            CHECK(rel_err(an, fd) < 1e-3);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("decoder: backward requires some incoming gradient") {
    SerialGuard sg;
    Model<float> m(tiny_config());
    m.init(7);
    Tensor<float> x(1, 2, 8, 8);
    Rng rng(50);
    fill_uniform(x, rng, 0.0, 1.0);
    EncoderPass<float> ep;
    m.encoder.forward(x, ep);
    DecoderPass<float> dp;
    m.dec_main.forward(ep.z_out(), dp);
    CHECK_THROWS_AS(m.dec_main.backward(dp, Tensor<float>(), {}), std::invalid_argument);
}

TEST_CASE("model: skip connections change the decoder and still train") {
    SerialGuard sg;
    ModelConfig mc = tiny_config();
    mc.skip_connections = true;
    Model<double> m(mc);
    m.init(8);
    Tensor<double> x(1, 2, 8, 8);
    Rng rng(60);
    fill_uniform(x, rng, 0.0, 1.0);
    EncoderPass<double> ep;
    m.encoder.forward(x, ep);
    DecoderPass<double> dp;
    CHECK_THROWS_AS(m.dec_main.forward(ep.z_out(), dp), std::invalid_argument);
    m.dec_main.forward(ep.z_out(), dp, &ep);
    CHECK(dp.probs.h == 8);

    // gradient check through the skip path
    MaskBatch labels(1, 8, 8);
    for (std::size_t i = 0; i < labels.data.size(); ++i)
        labels.data[i] = rng.uniform() < 0.5 ? 1 : 0;
    auto objective = [&]() {
        EncoderPass<double> e2;
        m.encoder.forward(x, e2);
        DecoderPass<double> d2;
        m.dec_main.forward(e2.z_out(), d2, &e2);
        return bootstrapped_ce(d2.probs, labels, 1.0, false).loss;
    };
    m.zero_grad();
    EncoderPass<double> e3;
    m.encoder.forward(x, e3);
    DecoderPass<double> d3;
    m.dec_main.forward(e3.z_out(), d3, &e3);
    auto ce = bootstrapped_ce(d3.probs, labels, 1.0, true);
    std::vector<Tensor<double>> skip_grads(static_cast<std::size_t>(mc.depth) + 1);
    Tensor<double> dz = m.dec_main.backward(d3, ce.dprobs, {}, &skip_grads);
    m.encoder.backward(e3, dz, &skip_grads);
    const double hstep = 1e-5;
    int checked = 0;
    for (auto& p : m.encoder_params()) {
        for (std::size_t i = 0; i < p.value->size(); i += 5) {
            const double an = (*p.grad)[i];
            const double orig = (*p.value)[i];
            (*p.value)[i] = orig + hstep;
            const double fp = objective();
            (*p.value)[i] = orig - hstep;
            const double fm = objective();
            (*p.value)[i] = orig;
            const double fd = (fp - fm) / (2 * hstep);
            if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
            CHECK(rel_err(an, fd) < 1e-3);
            ++checked;
        }
    }
    CHECK(checked > 20);
}
