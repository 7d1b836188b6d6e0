#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "marlin/neural.hpp"
#include "marlin/rng.hpp"

using namespace marlin;

namespace {

NetworkSpec tiny_spec(HeadKind head) {
    NetworkSpec spec;
    spec.input_width = 4;
    spec.T_hist = 3;
    spec.lstm_hidden = 3;
    spec.head = head;
    spec.n_actions = 2;
    spec.adv_width = 3;
    spec.val_width = 2;
    spec.critic_hidden = 2;
    return spec;
}

std::vector<double> random_state(const NetworkSpec& spec, Rng& rng) {
    std::vector<double> s(static_cast<std::size_t>(spec.T_hist) * spec.input_width);
    for (auto& v : s) v = rng.uniform() < 0.5 ? 0.0 : 1.0;  // binary observations
    return s;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1e-5, std::fabs(a), std::fabs(b)});
}

// central finite differences of a frozen-target loss
template <typename LossFn>
double max_fd_rel_err(ParameterVector params, const GradientVector& grad, LossFn loss) {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double keep = params[i];
        params[i] = keep + h;
        double up = loss(params);
        params[i] = keep - h;
        double down = loss(params);
        params[i] = keep;
        double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(grad[i], fd));
    }
    return worst;
}

}  // namespace

TEST_CASE("param_count reproduces the reference architecture size") {
    NetworkSpec spec;  // defaults: input 18, T 5, LSTM 20, dueling 10/10, 11 actions
    CHECK(param_count(spec) == 3672);
}

TEST_CASE("dense layers count (in+1)*out parameters") {
    NetworkSpec base = tiny_spec(HeadKind::SoftmaxActor);
    base.lstm_hidden = 2;
    base.n_actions = 3;
    std::size_t lstm_only = 4 * (base.input_width + base.lstm_hidden + 1) * base.lstm_hidden;
    CHECK(param_count(base) - lstm_only == 9);  // (2+1)*3
}

TEST_CASE("param_count matches instantiated vectors for every head") {
    for (HeadKind head : {HeadKind::DuelingQ, HeadKind::SoftmaxActor, HeadKind::Critic}) {
        NetworkSpec spec = tiny_spec(head);
        CHECK(init_params(spec, 1).size() == param_count(spec));
    }
}

TEST_CASE("zero parameters give zero Q-values and a uniform actor") {
    NetworkSpec q = tiny_spec(HeadKind::DuelingQ);
    ParameterVector zeros(param_count(q), 0.0);
    Rng rng(3);
    auto state = random_state(q, rng);
    for (double v : forward(q, zeros, state)) CHECK(v == 0.0);

    NetworkSpec a = tiny_spec(HeadKind::SoftmaxActor);
    a.n_actions = 5;
    ParameterVector azeros(param_count(a), 0.0);
    for (double v : forward(a, azeros, random_state(a, rng)))
        CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("forward rejects a wrong-length state") {
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    auto params = init_params(spec, 1);
    std::vector<double> bad(5, 0.0);
    CHECK_THROWS_AS(forward(spec, params, bad), std::invalid_argument);
}

TEST_CASE("dueling combine cancels constant advantages") {
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        auto params = init_params(spec, 100 + rep);
        auto state = random_state(spec, rng);
        auto q0 = forward(spec, params, state);

        // shift the advantage output bias block by a constant; layout:
        // 4 gate blocks, advW, advb, valW, valb, advOutW, then advOutb
        std::size_t I = spec.input_width, H = spec.lstm_hidden;
        std::size_t off = 4 * (I * H + H * H + H);
        off += H * spec.adv_width + spec.adv_width;                          // advW, advb
        off += H * spec.val_width + spec.val_width;                          // valW, valb
        off += static_cast<std::size_t>(spec.adv_width) * spec.n_actions;    // advOutW
        for (int j = 0; j < spec.n_actions; ++j) params[off + j] += 3.7;

        auto q1 = forward(spec, params, state);
        for (int j = 0; j < spec.n_actions; ++j)
            CHECK(q1[j] == doctest::Approx(q0[j]).epsilon(1e-12));
    }
}

TEST_CASE("softmax scores are positive and sum to one") {
    NetworkSpec spec = tiny_spec(HeadKind::SoftmaxActor);
    spec.n_actions = 7;
    Rng rng(11);
    for (int rep = 0; rep < 1000; ++rep) {
        auto params = init_params(spec, rep);
        auto scores = forward(spec, params, random_state(spec, rng));
        double sum = 0.0;
        for (double v : scores) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("analytic gradients match central differences on every head") {
    const double gamma = 0.9;
    double worst = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + seed);

        NetworkSpec q = tiny_spec(HeadKind::DuelingQ);
        auto params = init_params(q, 2000 + seed);
        std::vector<TdSample> batch;
        for (int i = 0; i < 3; ++i)
            batch.push_back({random_state(q, rng), static_cast<int>(rng.uniform_int(2)),
                             rng.normal(), random_state(q, rng)});
        auto targets = dqn_targets(q, params, batch, gamma);
        auto grad = backward_dqn(q, params, batch, targets);
        worst = std::max(worst, max_fd_rel_err(params, grad, [&](const ParameterVector& p) {
                             return dqn_loss(q, p, batch, targets);
                         }));

        NetworkSpec c = tiny_spec(HeadKind::Critic);
        auto cparams = init_params(c, 3000 + seed);
        std::vector<CriticSample> cbatch;
        for (int i = 0; i < 3; ++i)
            cbatch.push_back({random_state(c, rng), rng.normal(), random_state(c, rng)});
        auto ctargets = critic_targets(c, cparams, cbatch, gamma);
        auto cgrad = backward_critic(c, cparams, cbatch, ctargets);
        worst = std::max(worst, max_fd_rel_err(cparams, cgrad, [&](const ParameterVector& p) {
                             return critic_loss(c, p, cbatch, ctargets);
                         }));

        NetworkSpec a = tiny_spec(HeadKind::SoftmaxActor);
        auto aparams = init_params(a, 4000 + seed);
        std::vector<ActorSample> abatch;
        for (int i = 0; i < 3; ++i)
            abatch.push_back({random_state(a, rng), static_cast<int>(rng.uniform_int(2)),
                              rng.normal()});
        auto agrad = backward_actor(a, aparams, abatch);
        worst = std::max(worst, max_fd_rel_err(aparams, agrad, [&](const ParameterVector& p) {
                             return actor_loss(a, p, abatch);
                         }));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("a batch of duplicates has the single-sample gradient") {
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    auto params = init_params(spec, 5);
    Rng rng(6);
    TdSample sample{random_state(spec, rng), 1, 0.7, random_state(spec, rng)};
    std::vector<TdSample> one{sample}, two{sample, sample};
    auto t1 = dqn_targets(spec, params, one, 0.9);
    auto t2 = dqn_targets(spec, params, two, 0.9);
    auto g1 = backward_dqn(spec, params, one, t1);
    auto g2 = backward_dqn(spec, params, two, t2);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-12));
}

TEST_CASE("zero TD residual gives a zero gradient") {
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    auto params = init_params(spec, 8);
    Rng rng(9);
    TdSample sample{random_state(spec, rng), 0, 0.0, random_state(spec, rng)};
    // choose r so the bootstrap target equals the prediction exactly
    auto q_s = forward(spec, params, sample.s);
    auto q_next = forward(spec, params, sample.s_next);
    sample.r = q_s[0] - 0.9 * *std::max_element(q_next.begin(), q_next.end());
    std::vector<TdSample> batch{sample};
    auto targets = dqn_targets(spec, params, batch, 0.9);
    CHECK(dqn_loss(spec, params, batch, targets) == doctest::Approx(0.0));
    for (double g : backward_dqn(spec, params, batch, targets)) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("sgd_step arithmetic and linearity") {
    ParameterVector w{1.0, 2.0};
    sgd_step(w, {1.0, 1.0}, 0.5);
    CHECK(w == ParameterVector{0.5, 1.5});

    sgd_step(w, {0.0, 0.0}, 0.5);
    CHECK(w == ParameterVector{0.5, 1.5});

    ParameterVector a{1.0, -1.0}, b{1.0, -1.0};
    GradientVector g1{0.3, 0.1}, g2{-0.2, 0.4}, sum{0.1, 0.5};
    sgd_step(a, g1, 0.25);
    sgd_step(a, g2, 0.25);
    sgd_step(b, sum, 0.25);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-15));

    CHECK_THROWS_AS(sgd_step(a, {1.0}, 0.1), std::invalid_argument);
}

TEST_CASE("adam first step has unit normalized magnitude") {
    for (double c : {0.01, 1.0, 250.0}) {
        ParameterVector w{3.0};
        auto st = make_adam_state(1);
        adam_step(st, w, {c}, 0.05);
        CHECK(w[0] == doctest::Approx(3.0 - 0.05).epsilon(1e-5));
    }
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    ParameterVector w{1.0, -2.0};
    auto st = make_adam_state(2);
    for (int i = 0; i < 5; ++i) adam_step(st, w, {0.0, 0.0}, 0.1);
    CHECK(w == ParameterVector{1.0, -2.0});
}

TEST_CASE("adam matches a hand-computed two-step trace") {
    // independent arithmetic for beta1=0.9, beta2=0.999, eps=1e-8
    const double alpha = 0.1, g1 = 0.5, g2 = -0.25;
    double m = 0.1 * g1, v = 0.001 * g1 * g1;
    double w_expect = 1.0 - alpha * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
    m = 0.9 * m + 0.1 * g2;
    v = 0.999 * v + 0.001 * g2 * g2;
    double mhat = m / (1.0 - 0.81);
    double vhat = v / (1.0 - 0.999 * 0.999);
    w_expect -= alpha * mhat / (std::sqrt(vhat) + 1e-8);

    ParameterVector w{1.0};
    auto st = make_adam_state(1);
    adam_step(st, w, {g1}, alpha);
    adam_step(st, w, {g2}, alpha);
    CHECK(w[0] == doctest::Approx(w_expect).epsilon(1e-12));
}

TEST_CASE("fedavg basics") {
    ParameterVector w{0.5, -1.5, 2.0};
    CHECK(fedavg({w, w, w}) == w);

    ParameterVector neg{-0.5, 1.5, -2.0};
    for (double v : fedavg({w, neg})) CHECK(v == 0.0);

    CHECK_THROWS_AS(fedavg({}), std::invalid_argument);
    CHECK_THROWS_AS(fedavg({w, ParameterVector{1.0}}), std::invalid_argument);
}

TEST_CASE("fedavg of per-user SGD equals one pooled SGD step") {
    // common initialization, equal per-user minibatches, SGD: averaging the
    // locally updated parameters is one centralized step on the pooled batch
    const int users = 4, per_user = 2;
    const double gamma = 0.9, alpha = 0.05;
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    auto w0 = init_params(spec, 77);
    Rng rng(78);
    std::vector<TdSample> pooled;
    for (int i = 0; i < users * per_user; ++i)
        pooled.push_back({random_state(spec, rng), static_cast<int>(rng.uniform_int(2)),
                          rng.normal(), random_state(spec, rng)});

    std::vector<ParameterVector> locals;
    for (int u = 0; u < users; ++u) {
        std::vector<TdSample> mine(pooled.begin() + u * per_user,
                                   pooled.begin() + (u + 1) * per_user);
        auto targets = dqn_targets(spec, w0, mine, gamma);
        auto grad = backward_dqn(spec, w0, mine, targets);
        ParameterVector w = w0;
        sgd_step(w, grad, alpha);
        locals.push_back(std::move(w));
    }
    auto averaged = fedavg(locals);

    auto pooled_targets = dqn_targets(spec, w0, pooled, gamma);
    auto pooled_grad = backward_dqn(spec, w0, pooled, pooled_targets);
    ParameterVector centralized = w0;
    sgd_step(centralized, pooled_grad, alpha);

    for (std::size_t i = 0; i < centralized.size(); ++i)
        CHECK(std::fabs(averaged[i] - centralized[i]) < 1e-12);
}

TEST_CASE("quantization round trip") {
    ParameterVector constant(64, 0.75);
    auto q = quantize_params(constant, 8);
    CHECK(dequantize_params(q) == constant);

    Rng rng(21);
    ParameterVector v(512);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    auto q11 = quantize_params(v, 11);
    auto back = dequantize_params(q11);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        worst = std::max(worst, std::fabs(back[i] - v[i]));
    CHECK(worst <= 2.0 / (1 << 11));

    auto err_at = [&](int bits) {
        auto d = dequantize_params(quantize_params(v, bits));
        double e = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) e = std::max(e, std::fabs(d[i] - v[i]));
        return e;
    };
    CHECK(err_at(16) < err_at(8));

    CHECK_THROWS_AS(quantize_params(v, 1), std::invalid_argument);
    CHECK_THROWS_AS(quantize_params(v, 17), std::invalid_argument);
    ParameterVector with_nan{1.0, std::nan("")};
    CHECK_THROWS_AS(quantize_params(with_nan, 8), std::runtime_error);
}

TEST_CASE("quantized wire format packs bits tightly and round-trips") {
    Rng rng(22);
    ParameterVector v(101);
    for (auto& x : v) x = rng.normal();
    for (int bits : {2, 7, 11, 16}) {
        auto q = quantize_params(v, bits);
        auto blob = pack_quantized(q);
        std::size_t payload = blob.size() - (2 + 8 + 8 + 8);
        CHECK(payload == (v.size() * bits + 7) / 8);
        auto back = unpack_quantized(blob);
        CHECK(back.bits == q.bits);
        CHECK(back.scale == q.scale);
        CHECK(back.offset == q.offset);
        CHECK(back.codes == q.codes);
    }
}

TEST_CASE("checkpoints round-trip and reject mismatched specs") {
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    auto params = init_params(spec, 31);
    auto path = std::filesystem::temp_directory_path() / "marlin_test.ckpt";
    save_checkpoint(path.string(), spec, params);
    auto loaded = load_checkpoint(path.string(), spec);
    CHECK(loaded == params);

    NetworkSpec other = tiny_spec(HeadKind::SoftmaxActor);
    CHECK_THROWS_AS(load_checkpoint(path.string(), other), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("spec hash is layout-sensitive") {
    NetworkSpec a = tiny_spec(HeadKind::DuelingQ);
    NetworkSpec b = a;
    b.lstm_hidden += 1;
    CHECK(spec_hash(a) != spec_hash(b));
    CHECK(spec_hash(a) == spec_hash(tiny_spec(HeadKind::DuelingQ)));
}

TEST_CASE("init_params is seeded, in-bounds, and scale-stable") {
    NetworkSpec spec = tiny_spec(HeadKind::DuelingQ);
    auto a = init_params(spec, 4);
    auto b = init_params(spec, 4);
    CHECK(a == b);
    auto c = init_params(spec, 5);
    CHECK(a != c);
    double bound = 1.0 / std::sqrt(static_cast<double>(spec.val_width));  // loosest fan-in
    for (double v : a) CHECK(std::fabs(v) <= bound);
}
