#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "rarefx/forecaster.hpp"
#include "support.hpp"

using namespace rarefx;
using namespace rarefx::forecast;
using testing_support::Rng;

namespace {

std::vector<double> sinusoid(std::size_t n, double period, double level, double amp) {
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = level + amp * std::sin(2.0 * std::numbers::pi * t / period);
    return y;
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 1) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 32;
    c.learning_rate = 1e-3;
    c.seed = seed;
    return c;
}

TrainingSample random_sample(Rng& rng, std::size_t M, std::size_t H) {
    TrainingSample s;
    for (std::size_t j = 0; j < M; ++j) s.input.push_back(rng.uniform(-2, 2));
    for (std::size_t k = 0; k < H; ++k) {
        s.label.push_back(rng.uniform(-2, 2));
        s.rare_mask.push_back(rng.uniform(0, 1) < 0.3);
    }
    return s;
}

}  // namespace

TEST(RollingWindows, CountAndIndices) {
    std::vector<double> y(10);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = static_cast<double>(t);
    const auto s = build_rolling_windows(y, {4, 2, 1}, EventCalendar{});
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s[0].input, (std::vector<double>{0, 1, 2, 3}));
    EXPECT_EQ(s[0].label, (std::vector<double>{4, 5}));
    EXPECT_EQ(s[0].label_start, 4u);
    EXPECT_EQ(s[4].label, (std::vector<double>{8, 9}));
}

TEST(RollingWindows, StrideConsumingSeriesGivesOneSample) {
    const std::vector<double> y(10, 1.0);
    EXPECT_EQ(build_rolling_windows(y, {4, 2, 10 - 4 - 2 + 1}, EventCalendar{}).size(), 1u);
}

TEST(RollingWindows, RareMaskFromCalendar) {
    std::vector<double> y(10, 0.0);
    EventCalendar cal;
    cal.add("e", EventWindow(3, 2));  // indices 4, 5
    const auto s = build_rolling_windows(y, {4, 2, 1}, cal);
    EXPECT_EQ(s[0].rare_mask, (std::vector<bool>{true, true}));
    EXPECT_EQ(s[2].rare_mask, (std::vector<bool>{false, false}));
    EXPECT_EQ(s[1].rare_mask, (std::vector<bool>{true, false}));
}

TEST(RollingWindows, TooShortOrInvalid) {
    const std::vector<double> y(5, 0.0);
    EXPECT_THROW(build_rolling_windows(y, {4, 2, 1}, EventCalendar{}), ValidationError);
    EXPECT_THROW(build_rolling_windows(y, {0, 2, 1}, EventCalendar{}), ValidationError);
    EXPECT_THROW(build_rolling_windows(y, {2, 2, 0}, EventCalendar{}), ValidationError);
}

TEST(RollingWindows, IndexArithmeticProperty) {
    Rng rng(31);
    for (int c = 0; c < 300; ++c) {
        const std::size_t M = rng.index(1, 12), H = rng.index(1, 8), s = rng.index(1, 6);
        const std::size_t len = M + H + rng.index(0, 60);
        std::vector<double> y(len);
        for (std::size_t t = 0; t < len; ++t) y[t] = static_cast<double>(t);
        EventCalendar cal;
        const std::size_t t0 = rng.index(1, len - 2);
        const std::size_t d = rng.index(1, len - 1 - t0);
        cal.add("e", EventWindow(t0, d));
        const auto samples = build_rolling_windows(y, {M, H, s}, cal);
        ASSERT_EQ(samples.size(), (len - M - H) / s + 1);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& smp = samples[i];
            ASSERT_EQ(smp.label_start, i * s + M);
            for (std::size_t j = 0; j < M; ++j) ASSERT_EQ(smp.input[j], static_cast<double>(i * s + j));
            for (std::size_t k = 0; k < H; ++k) {
                ASSERT_EQ(smp.label[k], static_cast<double>(i * s + M + k));
                const std::size_t t = smp.label_start + k;
                ASSERT_EQ(smp.rare_mask[k], t > t0 && t <= t0 + d);
            }
        }
        if (s == 1) {
            std::vector<bool> hit(len, false);
            for (const auto& smp : samples)
                for (std::size_t k = 0; k < H; ++k) hit[smp.label_start + k] = true;
            for (std::size_t t = 0; t < len; ++t) ASSERT_EQ(hit[t], t >= M);
        }
    }
}

TEST(AdaptiveLoss, HandArithmetic) {
    AdaptiveLossConfig cfg;
    cfg.w1 = 0.5;
    cfg.w2 = 1.0;
    const std::vector<double> pred{0, 0, 0}, label{2, 1, 1};
    const auto v = adaptive_loss(pred, label, {true, false, false}, cfg);
    EXPECT_DOUBLE_EQ(v.loss, 3.0);
    EXPECT_EQ(v.per_step, (std::vector<double>{2, 1, 1}));
    cfg.distance = Distance::squared;
    EXPECT_DOUBLE_EQ(adaptive_loss(pred, label, {true, false, false}, cfg).loss, 0.5 * 4 + 1 + 1);
}

TEST(AdaptiveLoss, PerfectPredictionAndUnitWeights) {
    Rng rng(32);
    for (int c = 0; c < 200; ++c) {
        const auto s = random_sample(rng, 1, rng.index(1, 10));
        AdaptiveLossConfig cfg;
        cfg.w1 = rng.uniform(0, 5);
        cfg.w2 = rng.uniform(0.01, 5);
        ASSERT_EQ(adaptive_loss(s.label, s.label, s.rare_mask, cfg).loss, 0.0);
        cfg.w1 = cfg.w2 = 1.0;
        std::vector<double> pred(s.label.size(), 0.0);
        double total = 0.0;
        for (double v : s.label) total += std::abs(v);
        ASSERT_NEAR(adaptive_loss(pred, s.label, s.rare_mask, cfg).loss, total, 1e-12);
    }
}

TEST(AdaptiveLoss, DecompositionMonotonicityAndMaskInvarianceProperty) {
    Rng rng(33);
    for (int c = 0; c < 300; ++c) {
        const std::size_t H = rng.index(1, 12);
        auto s = random_sample(rng, 1, H);
        std::vector<double> pred(H);
        for (auto& v : pred) v = rng.uniform(-2, 2);
        const Distance eta = c % 2 ? Distance::absolute : Distance::squared;
        double rare = 0.0, other = 0.0;
        for (std::size_t k = 0; k < H; ++k) (s.rare_mask[k] ? rare : other) += distance(eta, s.label[k], pred[k]);
        const double w1 = rng.uniform(0, 3), w2 = rng.uniform(0.01, 3);
        ASSERT_EQ(adaptive_loss(pred, s.label, s.rare_mask, w1, w2, eta).loss, w1 * rare + w2 * other);
        ASSERT_LE(adaptive_loss(pred, s.label, s.rare_mask, w1, w2, eta).loss,
                  adaptive_loss(pred, s.label, s.rare_mask, w1 + rng.uniform(0, 2), w2, eta).loss);
        const double before = adaptive_loss(pred, s.label, s.rare_mask, 0.0, w2, eta).loss;
        for (std::size_t k = 0; k < H; ++k)
            if (s.rare_mask[k]) s.label[k] += rng.uniform(-100, 100);
        ASSERT_EQ(adaptive_loss(pred, s.label, s.rare_mask, 0.0, w2, eta).loss, before);
    }
}

TEST(AdaptiveLoss, Errors) {
    AdaptiveLossConfig cfg;
    const std::vector<double> a{1, 2}, b{1};
    EXPECT_THROW(adaptive_loss(a, b, {true, false}, cfg), ValidationError);
    cfg.w1 = cfg.w2 = 0.0;
    EXPECT_THROW(adaptive_loss(a, a, {true, false}, cfg), ValidationError);
    cfg.w1 = -1.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Mlp, ParameterCount) {
    EXPECT_EQ(Mlp::parameter_count({4, 3, 2}), (4u + 1) * 3 + (3 + 1) * 2);
    Mlp m({90, 32, 32, 30}, Activation::relu);
    EXPECT_EQ(m.parameters().size(), 91u * 32 + 33 * 32 + 33 * 30);
    EXPECT_THROW(Mlp({4}, Activation::relu), ValidationError);
}

TEST(Train, ConstantSeriesIsLearned) {
    const std::vector<double> y(200, 5.0);
    EventCalendar cal;
    cal.add("e", EventWindow(100, 5));
    const RollingWindowConfig rw{20, 5, 1};
    const auto model = train(build_rolling_windows(y, rw, cal), {{16}, Activation::relu}, {}, quick(200));
    const auto synth = insample_forecast(model, y, rw);
    for (std::size_t t : synth.support()) ASSERT_NEAR(synth.values[t], 5.0, 0.05) << "t=" << t;
}

TEST(Train, SmoothSinusoidFitsNonRareSteps) {
    const auto y = sinusoid(400, 20, 10.0, 3.0);
    EventCalendar cal;
    cal.add("e", EventWindow(200, 5));
    const RollingWindowConfig rw{40, 10, 1};
    auto cfg = quick(2000);
    cfg.batch_size = 64;
    const auto model = train(build_rolling_windows(y, rw, cal), {{64}, Activation::relu}, {}, cfg);
    const auto synth = insample_forecast(model, y, rw);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t t : synth.support())
        if (!cal.contains(t)) {
            s += std::abs(y[t] - synth.values[t]) / std::abs(y[t]);
            ++n;
        }
    EXPECT_LT(100.0 * s / n, 5.0);
    EXPECT_LE(model.epoch_loss.back(), model.epoch_loss.front());
}

TEST(Train, DeterministicGivenSeed) {
    const auto y = sinusoid(150, 10, 3, 1);
    const auto samples = build_rolling_windows(y, {20, 5, 2}, EventCalendar{});
    const auto a = train(samples, {{8, 8}, Activation::relu}, {}, quick(5, 42));
    const auto b = train(samples, {{8, 8}, Activation::relu}, {}, quick(5, 42));
    EXPECT_EQ(a.parameters(), b.parameters());
    EXPECT_EQ(a.epoch_loss, b.epoch_loss);
    EXPECT_NE(a.parameters(), train(samples, {{8, 8}, Activation::relu}, {}, quick(5, 43)).parameters());
}

TEST(Train, FinalEpochNotWorseThanFirstProperty) {
    Rng rng(34);
    for (int c = 0; c < 20; ++c) {
        const auto y = sinusoid(120, rng.uniform(5, 30), rng.uniform(1, 50), rng.uniform(0.5, 5));
        const auto samples = build_rolling_windows(y, {16, 4, 3}, EventCalendar{});
        const auto m = train(samples, {{8}, c % 2 ? Activation::relu : Activation::tanh}, {}, quick(30, c));
        ASSERT_LE(m.epoch_loss.back(), m.epoch_loss.front());
    }
}

TEST(Train, DivergenceNamesEpoch) {
    const auto y = sinusoid(100, 10, 3, 1);
    auto cfg = quick(50);
    cfg.optimizer = Optimizer::sgd;
    cfg.learning_rate = 1e12;
    AdaptiveLossConfig loss;
    loss.distance = Distance::squared;
    try {
        train(build_rolling_windows(y, {10, 5, 1}, EventCalendar{}), {{16}, Activation::relu}, loss, cfg);
        FAIL() << "expected divergence";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("training diverged at epoch"), std::string::npos);
    }
}

TEST(Train, Preconditions) {
    EXPECT_THROW(train({}, {}, {}, quick(1)), ValidationError);
    const auto samples = build_rolling_windows(std::vector<double>(20, 1.0), {4, 2, 1}, EventCalendar{});
    auto cfg = quick(1);
    cfg.learning_rate = 0.0;
    EXPECT_THROW(train(samples, {}, {}, cfg), ValidationError);
    cfg = quick(0);
    EXPECT_THROW(train(samples, {}, {}, cfg), ValidationError);
}

TEST(Overlap, MeanAndCounts) {
    OverlapAccumulator acc(10);
    acc.add(5, 4.0);
    acc.add(5, 4.2);
    acc.add(6, 3.0);
    const auto s = acc.finish();
    EXPECT_NEAR(s.values[5], 4.1, 1e-15);
    EXPECT_EQ(s.overlap_counts[5], 2u);
    EXPECT_EQ(s.values[6], 3.0);
    EXPECT_EQ(s.overlap_counts[6], 1u);
    EXPECT_FALSE(s.covers(4));
    EXPECT_THROW(s.at(4), BoundsError);
    OverlapAccumulator med(3);
    for (double v : {1.0, 2.0, 10.0}) med.add(1, v);
    EXPECT_EQ(med.finish(OverlapAggregation::median).values[1], 2.0);
}

TEST(InsampleForecast, SupportAndUnitHorizonCounts) {
    const auto y = sinusoid(60, 8, 2, 1);
    const RollingWindowConfig rw{10, 1, 1};
    const auto model = train(build_rolling_windows(y, rw, EventCalendar{}), {{4}, Activation::tanh}, {}, quick(2));
    const auto s = insample_forecast(model, y, rw);
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (t < 10)
            EXPECT_FALSE(s.covers(t));
        else
            EXPECT_EQ(s.overlap_counts[t], 1u);
    }
    EXPECT_THROW(insample_forecast(model, y, {11, 1, 1}), ValidationError);
}

TEST(InsampleForecast, OverlapCountsAndMeanProperty) {
    const auto y = sinusoid(80, 9, 5, 2);
    Rng rng(35);
    const RollingWindowConfig base{12, 6, 1};
    const auto model = train(build_rolling_windows(y, base, EventCalendar{}), {{6}, Activation::tanh}, {}, quick(2));
    for (int c = 0; c < 200; ++c) {
        const RollingWindowConfig rw{12, 6, rng.index(1, 9)};
        const auto s = insample_forecast(model, y, rw);
        // Independent recount of how many windows cover each t and their mean forecast.
        std::vector<std::size_t> cnt(y.size(), 0);
        std::vector<long double> sum(y.size(), 0);
        for (std::size_t i = 0; i * rw.stride + 18 <= y.size(); ++i) {
            const auto f = model.forecast(0, std::span<const double>(y).subspan(i * rw.stride, 12));
            for (std::size_t k = 0; k < 6; ++k) {
                ++cnt[i * rw.stride + 12 + k];
                sum[i * rw.stride + 12 + k] += f[k];
            }
        }
        for (std::size_t t = 0; t < y.size(); ++t) {
            ASSERT_EQ(s.overlap_counts[t], cnt[t]);
            if (cnt[t]) {
                ASSERT_NEAR(s.values[t], static_cast<double>(sum[t] / cnt[t]), 1e-12);
            }
        }
    }
}

TEST(ExtractEffect, Subtraction) {
    SyntheticControlSeries s;
    s.values = {0, 0, 4.1, 3.0};
    s.overlap_counts = {0, 0, 1, 1};
    const std::vector<double> y{0, 0, 6.1, 3.0};
    const auto e = extract_effect(s, y, EventWindow(1, 2));
    EXPECT_NEAR(e.delta_hat[0], 2.0, 1e-12);
    EXPECT_EQ(e.delta_hat[1], 0.0);
    EXPECT_EQ(e.n_series, 1u);
}

TEST(ExtractEffect, PerfectReconstructionIsZero) {
    const std::vector<double> y{1, 2, 3, 4, 5};
    SyntheticControlSeries s{y, {1, 1, 1, 1, 1}};
    for (double v : extract_effect(s, y, EventWindow(1, 3)).delta_hat) EXPECT_EQ(v, 0.0);
}

TEST(ExtractEffect, MissingSupportListsIndices) {
    SyntheticControlSeries s{{0, 0, 0, 0, 0, 0}, {0, 0, 0, 1, 0, 0}};
    const std::vector<double> y(6, 1.0);
    try {
        extract_effect(s, y, EventWindow(1, 4));
        FAIL();
    } catch (const BoundsError& e) {
        EXPECT_NE(std::string(e.what()).find("2, 4, 5"), std::string::npos) << e.what();
    }
}

TEST(ExtractEffect, SpikeRecoveredWhenRareStepExcludedFromLoss) {
    auto y = sinusoid(400, 20, 10.0, 3.0);
    const std::size_t spike = 257;
    y[spike] += 3.0;
    EventCalendar cal;
    cal.add("spike", EventWindow(spike - 1, 1));
    const RollingWindowConfig rw{40, 10, 1};
    AdaptiveLossConfig loss;
    loss.w1 = 0.0;
    auto cfg = quick(1000);
    cfg.batch_size = 64;
    const auto model = train(build_rolling_windows(y, rw, cal), {{64}, Activation::relu}, loss, cfg);
    const auto e = extract_effect(insample_forecast(model, y, rw), y, EventWindow(spike - 1, 1));
    EXPECT_GE(e.delta_hat[0], 2.4);
    EXPECT_LE(e.delta_hat[0], 3.6);
}

TEST(GradientCheck, SmoothModelsProperty) {
    Rng rng(36);
    for (int c = 0; c < 20; ++c) {
        const std::size_t M = rng.index(2, 8), H = rng.index(1, 5);
        Mlp net({M, rng.index(2, 6), rng.index(2, 6), H}, Activation::tanh);
        net.initialize(c);
        for (auto& p : net.parameters()) p += rng.uniform(-0.1, 0.1);
        const auto s = random_sample(rng, M, H);
        AdaptiveLossConfig loss;
        loss.w1 = rng.uniform(0, 2);
        loss.w2 = rng.uniform(0.1, 2);
        loss.distance = c % 2 ? Distance::absolute : Distance::squared;
        EXPECT_LT(gradient_check(net, s, loss, 1e-6), 1e-4) << "case " << c;
    }
}

TEST(GradientCheck, ZeroGradientAtPerfectFit) {
    Mlp net({3, 4, 2}, Activation::tanh);
    net.initialize(3);
    TrainingSample s;
    s.input = {0.1, -0.2, 0.3};
    s.label = net.predict(s.input);
    s.rare_mask = {false, true};
    AdaptiveLossConfig loss;
    loss.distance = Distance::squared;
    EXPECT_LT(gradient_check(net, s, loss, 1e-6), 1e-8);
}

TEST(GradientCheck, ReluKinksAreFiltered) {
    Rng rng(37);
    for (int c = 0; c < 20; ++c) {
        Mlp net({5, 6, 6, 3}, Activation::relu);
        net.initialize(100 + c);
        auto s = random_sample(rng, 5, 3);
        // Put one hidden unit exactly on its kink: zero its pre-activation through the bias.
        Mlp::Trace tr;
        net.forward(s.input, tr);
        net.parameters()[5 * 6] -= tr.pre[0][0];
        AdaptiveLossConfig loss;
        loss.distance = Distance::squared;
        EXPECT_LT(gradient_check(net, s, loss, 1e-6), 1e-4);
    }
}

TEST(ModelIo, ExactRoundTrip) {
    const auto y = sinusoid(100, 10, 3, 1);
    const auto samples = build_rolling_windows(y, {20, 5, 1}, EventCalendar{});
    const auto m = train(samples, {{7, 3}, Activation::tanh}, {}, quick(2));
    std::stringstream ss;
    write_model(ss, m);
    const auto back = read_model(ss);
    EXPECT_EQ(back, m);
    EXPECT_EQ(back.parameters(), m.parameters());
    EXPECT_EQ(back.activation(), Activation::tanh);
    std::stringstream bad("rarefx-forecaster 9\n");
    EXPECT_THROW(read_model(bad), Error);
}

TEST(RobustNormalization, MedianAndIqr) {
    const auto n = robust_normalization({1, 2, 3, 4, 5, 100});
    EXPECT_DOUBLE_EQ(n.shift, 3.5);
    EXPECT_GT(n.scale, 0.0);
    EXPECT_DOUBLE_EQ(n.invert(n.apply(17.25)), 17.25);
    const auto c = robust_normalization({5, 5, 5});
    EXPECT_EQ(c.shift, 5.0);
    EXPECT_GT(c.scale, 0.0);
}
