#include <catch2/catch_amalgamated.hpp>

#include "mito/nn/layers.hpp"
#include "mito/nn/optim.hpp"
#include "mito/nn/serialize.hpp"

#include "support/tmpdir.hpp"

using namespace mito;
using namespace mito::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
    Tensor t(n, c, h, w);
    for (auto& v : t.v) v = static_cast<float>(rng.normal());
    return t;
}

/// Scalar probe loss: fixed random projection of the network output.
double probe_loss(Sequential& net, const Tensor& x, const std::vector<float>& coefs,
                  Tensor* dy_out = nullptr) {
    const Tensor y = net.forward(x, true);
    double loss = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) loss += y.v[i] * coefs[i % coefs.size()];
    if (dy_out) {
        Tensor dy = y;
        for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] = coefs[i % coefs.size()];
        *dy_out = dy;
    }
    return loss;
}

Sequential build_net(std::uint64_t seed) {
    Rng rng(seed);
    Sequential net;
    net.add("stem", std::make_unique<Conv2d>(2, 3, 3, 1, 1, rng.derive("c1")));
    net.add("stem", std::make_unique<ReLU>());
    net.add("mid", std::make_unique<Conv2d>(3, 3, 3, 2, 1, rng.derive("c2")));
    net.add("mid", std::make_unique<BatchNorm2d>(3));
    net.add("mid", std::make_unique<Tanh>());
    net.add("head", std::make_unique<Linear>(3 * 3 * 3, 2, rng.derive("fc")));
    return net;
}

}  // namespace

TEST_CASE("backprop gradients match finite differences", "[nn]") {
    Rng rng(7);
    Sequential net = build_net(5);
    const Tensor x = random_tensor(2, 2, 5, 5, rng);
    std::vector<float> coefs;
    for (int i = 0; i < 16; ++i) coefs.push_back(static_cast<float>(rng.normal()));

    std::vector<ParamRef> params, buffers;
    net.collect(params, buffers);

    Tensor dy;
    net.zero_grad();
    probe_loss(net, x, coefs, &dy);
    const Tensor dx = net.backward(dy);

    const double eps = 1e-3;
    // Parameter gradients, a few entries from every tensor.
    for (auto& p : params) {
        const std::size_t stride = std::max<std::size_t>(1, p.value->size() / 5);
        for (std::size_t i = 0; i < p.value->size(); i += stride) {
            const float keep = (*p.value)[i];
            (*p.value)[i] = keep + static_cast<float>(eps);
            const double up = probe_loss(net, x, coefs);
            (*p.value)[i] = keep - static_cast<float>(eps);
            const double down = probe_loss(net, x, coefs);
            (*p.value)[i] = keep;
            const double numeric = (up - down) / (2 * eps);
            CAPTURE(p.name, i);
            REQUIRE((*p.grad)[i] == Catch::Approx(numeric).margin(2e-2));
        }
    }
    // Input gradients.
    Tensor xm = x;
    for (std::size_t i = 0; i < xm.v.size(); i += 7) {
        const float keep = xm.v[i];
        xm.v[i] = keep + static_cast<float>(eps);
        const double up = probe_loss(net, xm, coefs);
        xm.v[i] = keep - static_cast<float>(eps);
        const double down = probe_loss(net, xm, coefs);
        xm.v[i] = keep;
        const double numeric = (up - down) / (2 * eps);
        REQUIRE(dx.v[i] == Catch::Approx(numeric).margin(2e-2));
    }
}

TEST_CASE("batchnorm switches between batch and running statistics", "[nn]") {
    Rng rng(8);
    BatchNorm2d bn(2);
    const Tensor x = random_tensor(4, 2, 3, 3, rng);
    const Tensor y = bn.forward(x, true);
    // Training output is standardized per channel (gamma=1, beta=0).
    for (int c = 0; c < 2; ++c) {
        double sum = 0.0, sq = 0.0;
        long m = 0;
        for (int n = 0; n < y.n; ++n)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) {
                    sum += y.at(n, c, yy, xx);
                    sq += y.at(n, c, yy, xx) * y.at(n, c, yy, xx);
                    ++m;
                }
        REQUIRE(sum / m == Catch::Approx(0.0).margin(1e-4));
        REQUIRE(sq / m == Catch::Approx(1.0).margin(1e-2));
    }
    // Eval mode is deterministic and uses running stats (no crash, same twice).
    const Tensor e1 = bn.forward(x, false);
    const Tensor e2 = bn.forward(x, false);
    REQUIRE(e1.v == e2.v);
}

TEST_CASE("dropout active only in training mode and inversely scaled", "[nn]") {
    Rng rng(9);
    Dropout drop(0.5f, rng.derive("dropout"));
    Tensor x(1, 1, 20, 20, 1.f);
    const Tensor eval_out = drop.forward(x, false);
    REQUIRE(eval_out.v == x.v);

    const Tensor train_out = drop.forward(x, true);
    long zeros = 0;
    for (float v : train_out.v) {
        REQUIRE((v == 0.f || v == 2.f));
        zeros += v == 0.f;
    }
    REQUIRE(zeros > 100);
    REQUIRE(zeros < 300);
}

TEST_CASE("adam drives a tiny regression to near-zero loss", "[nn]") {
    Rng rng(10);
    Sequential net;
    net.add("fc", std::make_unique<Linear>(3, 1, rng.derive("w")));
    std::vector<ParamRef> params, buffers;
    net.collect(params, buffers);
    Adam adam;

    const float target_w[3] = {0.5f, -1.0f, 2.0f};
    double loss = 0.0;
    for (int step = 0; step < 400; ++step) {
        Tensor x = random_tensor(8, 3, 1, 1, rng);
        Tensor t(8, 1, 1, 1);
        for (int n = 0; n < 8; ++n) {
            t.at(n, 0, 0, 0) = target_w[0] * x.at(n, 0, 0, 0) + target_w[1] * x.at(n, 1, 0, 0) +
                               target_w[2] * x.at(n, 2, 0, 0) + 0.25f;
        }
        net.zero_grad();
        const Tensor y = net.forward(x, true);
        Tensor dy = y;
        loss = 0.0;
        for (int n = 0; n < 8; ++n) {
            const float d = y.at(n, 0, 0, 0) - t.at(n, 0, 0, 0);
            loss += d * d / 8.0;
            dy.at(n, 0, 0, 0) = 2.f * d / 8.f;
        }
        net.backward(dy);
        adam.step(params, 0.05, trainable_all());
    }
    REQUIRE(loss < 1e-3);
}

TEST_CASE("frozen blocks keep their exact bit pattern under sgd", "[nn]") {
    Rng rng(11);
    Sequential net = build_net(6);
    std::vector<ParamRef> params, buffers;
    net.collect(params, buffers);

    std::vector<std::vector<float>> before;
    for (auto& p : params) before.push_back(*p.value);

    const Tensor x = random_tensor(1, 2, 5, 5, rng);
    std::vector<float> coefs(8, 0.3f);
    Sgd sgd(0.9);
    for (int step = 0; step < 3; ++step) {
        net.zero_grad();
        Tensor dy;
        probe_loss(net, x, coefs, &dy);
        net.backward(dy);
        sgd.step(params, 0.01, trainable_blocks({"mid", "head"}));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const bool is_stem = params[i].name.rfind("stem.", 0) == 0;
        if (is_stem) {
            REQUIRE(*params[i].value == before[i]);
        } else {
            REQUIRE(*params[i].value != before[i]);
        }
    }
}

TEST_CASE("weights round-trip through the binary checkpoint format", "[nn]") {
    testutil::TmpDir tmp("weights");
    Rng rng(12);
    Sequential net = build_net(7);
    std::vector<ParamRef> params, buffers;
    net.collect(params, buffers);
    // Run one training-mode forward so BN buffers move off their defaults.
    const Tensor x = random_tensor(2, 2, 5, 5, rng);
    net.forward(x, true);
    save_weights(tmp / "w.bin", params, buffers);

    Sequential other = build_net(99);
    std::vector<ParamRef> oparams, obuffers;
    other.collect(oparams, obuffers);
    load_weights(tmp / "w.bin", oparams, obuffers);

    const Tensor y1 = net.forward(x, false);
    const Tensor y2 = other.forward(x, false);
    REQUIRE(y1.v == y2.v);

    // Mismatched destination must be rejected.
    Sequential small;
    small.add("fc", std::make_unique<Linear>(2, 2, rng.derive("s")));
    std::vector<ParamRef> sparams, sbuffers;
    small.collect(sparams, sbuffers);
    REQUIRE_THROWS(load_weights(tmp / "w.bin", sparams, sbuffers));
}
