#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "customs/selection.hpp"

using namespace customs;

namespace {

Prediction mk_pred(double score, double revenue, std::initializer_list<double> z) {
    Prediction p;
    p.fraud_score = score;
    p.revenue_estimate = revenue;
    p.embedding = Eigen::VectorXd(static_cast<Eigen::Index>(z.size()));
    Eigen::Index i = 0;
    for (double v : z) p.embedding[i++] = v;
    return p;
}

std::vector<Eigen::VectorXd> points2d(std::initializer_list<std::pair<double, double>> pts) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& [x, y] : pts) {
        Eigen::VectorXd v(2);
        v << x, y;
        out.push_back(v);
    }
    return out;
}

// Two-class softmax loss against the pseudo label, as a function of the
// per-class final-layer weights.
double pseudo_bce(const Eigen::VectorXd& w0, const Eigen::VectorXd& w1,
                  const Eigen::VectorXd& z, double bias, bool pseudo_positive) {
    const double l0 = w0.dot(z);
    const double l1 = w1.dot(z) + bias;
    const double mx = std::max(l0, l1);
    const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
    return lse - (pseudo_positive ? l1 : l0);
}

ModelSnapshot ramp_model() {
    ModelSnapshot m;
    m.input_dim = 1;
    m.hidden_dim = 1;
    m.params = zero_params(1, 1);
    m.params.enc_w(0, 0) = 1.0;
    m.params.cls_w[0] = 1.0;
    return m;
}

Example val_item(double x, double revenue) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return {v, revenue > 0.0, revenue};
}

}  // namespace

TEST_CASE("gradient embedding blocks follow the pseudo label", "[selection]") {
    const auto g = gradient_embedding(mk_pred(0.8, 0, {1, 2}));
    REQUIRE(g.size() == 4);
    REQUIRE(g[0] == Catch::Approx(0.2));
    REQUIRE(g[1] == Catch::Approx(0.4));
    REQUIRE(g[2] == Catch::Approx(-0.2));
    REQUIRE(g[3] == Catch::Approx(-0.4));

    const auto boundary = gradient_embedding(mk_pred(0.5, 0, {1, 2}));
    REQUIRE(boundary[0] == Catch::Approx(0.5));
    REQUIRE(boundary[1] == Catch::Approx(1.0));
    REQUIRE(boundary[2] == Catch::Approx(-0.5));
    REQUIRE(boundary[3] == Catch::Approx(-1.0));

    const auto confident = gradient_embedding(mk_pred(1.0 - 1e-9, 0, {1, 2}));
    REQUIRE(confident.norm() < 1e-8);
}

TEST_CASE("gradient embedding matches the softmax loss gradient", "[selection]") {
    Rng rng(88);
    for (int trial = 0; trial < 50; ++trial) {
        const int D = 3, H = 4;
        ModelParams params = init_params(D, H, rng);
        params.cls_b = rng.normal();
        Eigen::VectorXd x(D);
        for (int j = 0; j < D; ++j) x[j] = 2 * rng.normal();
        const Prediction pred = predict(params, x);
        const Eigen::VectorXd analytic = gradient_embedding(pred);

        const bool pos = pred.fraud_score >= 0.5;
        const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(H);
        const Eigen::VectorXd& w1 = params.cls_w;
        const double h = 1e-5;
        for (int j = 0; j < 2 * H; ++j) {
            Eigen::VectorXd u0 = w0, u1 = w1, d0 = w0, d1 = w1;
            (j < H ? u0[j] : u1[j - H]) += h;
            (j < H ? d0[j] : d1[j - H]) -= h;
            const double fd = (pseudo_bce(u0, u1, pred.embedding, params.cls_b, pos) -
                               pseudo_bce(d0, d1, pred.embedding, params.cls_b, pos)) /
                              (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic[j]), 1e-8});
            REQUIRE(std::abs(fd - analytic[j]) / denom < 1e-4);
        }
    }
}

TEST_CASE("uncertainty peaks at the decision boundary", "[selection]") {
    REQUIRE(std::abs(uncertainty_scale(0.5) - 1.0) < 1e-12);
    REQUIRE(std::abs(uncertainty_scale(0.0) - 0.1) < 1e-12);
    REQUIRE(std::abs(uncertainty_scale(1.0) - 0.1) < 1e-12);
    REQUIRE(std::abs(uncertainty_scale(0.75) - 0.55) < 1e-12);
    for (int i = 0; i <= 100; ++i) {
        const double u = uncertainty_scale(i / 100.0);
        REQUIRE(u >= 0.1 - 1e-12);
        REQUIRE(u <= 1.0);
        if (i != 50) REQUIRE(u < 1.0);
    }
}

TEST_CASE("scale factor compounds uncertainty and log revenue", "[selection]") {
    REQUIRE(scale_factor(0.5, 0.0) == 0.0);
    REQUIRE(scale_factor(0.5, std::exp(1.0) - 1.0) == Catch::Approx(1.0));
    REQUIRE(scale_factor(1.0, std::exp(2.0) - 1.0) == Catch::Approx(0.2));
}

TEST_CASE("scaled embedding is the scale factor times the raw one", "[selection]") {
    REQUIRE(scaled_embedding(mk_pred(0.8, 0.0, {1, 2})).isZero());
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pred = mk_pred(rng.uniform(), rng.uniform(0, 500),
                                  {rng.normal(), rng.normal(), rng.normal()});
        const double s = scale_factor(pred.fraud_score, pred.revenue_estimate);
        REQUIRE(scaled_embedding(pred).norm() ==
                Catch::Approx(s * gradient_embedding(pred).norm()));
    }
}

TEST_CASE("seeding walks toward far points", "[selection]") {
    const auto pts = points2d({{0, 0}, {0, 0}, {10, 0}});
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto picked = kmeanspp_select(pts, 2, rng, {2});
        REQUIRE(picked[0] == 2);
        REQUIRE((picked[1] == 0 || picked[1] == 1));
    }
}

TEST_CASE("second pick frequency tracks squared distances", "[selection]") {
    const auto pts = points2d({{0, 0}, {3, 0}, {10, 0}});
    int far_picks = 0;
    const int trials = 5000;
    for (int seed = 0; seed < trials; ++seed) {
        Rng rng(static_cast<uint64_t>(seed));
        const auto picked = kmeanspp_select(pts, 2, rng, {0});
        if (picked[1] == 2) ++far_picks;
    }
    REQUIRE(std::abs(far_picks / static_cast<double>(trials) - 100.0 / 109.0) < 0.02);
}

TEST_CASE("seeding handles edge cases and rejects bad input", "[selection]") {
    const auto pts = points2d({{0, 0}, {1, 1}, {2, 2}});
    Rng rng(1);
    REQUIRE(kmeanspp_select(pts, 0, rng).empty());
    auto all = kmeanspp_select(pts, 3, rng);
    std::sort(all.begin(), all.end());
    REQUIRE(all == std::vector<int>{0, 1, 2});
    REQUIRE_THROWS_AS(kmeanspp_select(pts, 4, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(kmeanspp_select(pts, -1, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(kmeanspp_select(pts, 2, rng, {0, 0}), std::invalid_argument);
    REQUIRE_THROWS_AS(kmeanspp_select(pts, 2, rng, {5}), std::invalid_argument);
    REQUIRE_THROWS_AS(kmeanspp_select(pts, 1, rng, {0, 1}), std::invalid_argument);

    const auto same = points2d({{4, 4}, {4, 4}, {4, 4}, {4, 4}});
    const auto picked = kmeanspp_select(same, 3, rng);
    REQUIRE(std::set<int>(picked.begin(), picked.end()).size() == 3);
}

TEST_CASE("seeding draws are invariant to uniform scaling", "[selection]") {
    Rng gen(9);
    std::vector<Eigen::VectorXd> pts, scaled;
    for (int i = 0; i < 40; ++i) {
        Eigen::VectorXd v(3);
        for (int j = 0; j < 3; ++j) v[j] = gen.normal();
        pts.push_back(v);
        scaled.push_back(3.7 * v);
    }
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng a(seed), b(seed);
        REQUIRE(kmeanspp_select(pts, 10, a) == kmeanspp_select(scaled, 10, b));
    }
}

TEST_CASE("exploitation takes the top scores", "[selection]") {
    std::vector<Prediction> preds = {mk_pred(0.9, 0, {0}), mk_pred(0.1, 0, {0}),
                                     mk_pred(0.5, 0, {0})};
    Rng rng(2);
    auto top = select_exploit(preds, 2, rng);
    std::sort(top.begin(), top.end());
    REQUIRE(top == std::vector<int>{0, 2});
    REQUIRE(select_exploit(preds, 0, rng).empty());
    REQUIRE(select_exploit(preds, 10, rng).size() == 3);
    REQUIRE_THROWS_AS(select_exploit(preds, -1, rng), std::invalid_argument);

    Rng gen(5);
    std::vector<Prediction> big;
    for (int i = 0; i < 1000; ++i) big.push_back(mk_pred(gen.uniform(), 0, {0}));
    Rng tiebreak(6);
    const auto chosen = select_exploit(big, 100, tiebreak);
    std::vector<char> in(big.size(), 0);
    double min_chosen = 2.0, max_unchosen = -1.0;
    for (int i : chosen) in[static_cast<std::size_t>(i)] = 1;
    for (std::size_t i = 0; i < big.size(); ++i)
        (in[i] ? min_chosen = std::min(min_chosen, big[i].fraud_score)
               : max_unchosen = std::max(max_unchosen, big[i].fraud_score));
    REQUIRE(min_chosen >= max_unchosen);
}

TEST_CASE("score ties split across seeds", "[selection]") {
    std::vector<Prediction> preds = {mk_pred(0.5, 0, {0}), mk_pred(0.5, 0, {0})};
    int first = 0;
    for (uint64_t seed = 0; seed < 400; ++seed) {
        Rng rng(seed);
        if (select_exploit(preds, 1, rng)[0] == 0) ++first;
    }
    REQUIRE(first > 100);
    REQUIRE(first < 300);
}

TEST_CASE("random selection is hypergeometric", "[selection]") {
    Rng once(3);
    auto all = select_random(4, 4, once);
    std::sort(all.begin(), all.end());
    REQUIRE(all == std::vector<int>{0, 1, 2, 3});
    REQUIRE(select_random(4, 0, once).empty());

    const int trials = 10000, n = 50, k = 10;
    std::vector<int> hits(3, 0);
    const std::vector<int> watch = {0, 7, 49};
    for (int t = 0; t < trials; ++t) {
        Rng rng(static_cast<uint64_t>(t));
        for (int idx : select_random(n, k, rng))
            for (std::size_t w = 0; w < watch.size(); ++w)
                if (idx == watch[w]) ++hits[w];
    }
    for (int h : hits) REQUIRE(std::abs(h / static_cast<double>(trials) - 0.2) < 0.02);
}

TEST_CASE("identical embeddings reduce diversity picks to sampling", "[selection]") {
    std::vector<Prediction> preds;
    for (int i = 0; i < 10; ++i) preds.push_back(mk_pred(0.5, 3.0, {1, 1}));
    Rng rng(7);
    const auto picked = select_badge(preds, 4, rng);
    REQUIRE(picked.size() == 4);
    REQUIRE(std::set<int>(picked.begin(), picked.end()).size() == 4);
}

TEST_CASE("constant scale makes the two diversity strategies agree", "[selection]") {
    Rng gen(11);
    std::vector<Prediction> preds;
    for (int i = 0; i < 60; ++i)
        preds.push_back(mk_pred(0.3, std::exp(1.0) - 1.0,
                                {gen.normal(), gen.normal(), gen.normal()}));
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng a(seed), b(seed);
        REQUIRE(select_badge(preds, 15, a) == select_bate(preds, 15, b));
    }
}

TEST_CASE("the gate trusts the model only with validation revenue", "[selection]") {
    const auto model = ramp_model();
    std::vector<Prediction> preds;
    for (int i = 0; i < 30; ++i) preds.push_back(mk_pred(0.4, 2.0, {1.0 * i, 1}));
    StrategySpec spec = make_strategy("gate");
    SelectionInput input;
    input.predictions = &preds;
    input.model = &model;
    input.week_inspection_rate = 0.1;

    // top-ranked validation item carries all the revenue
    std::vector<Example> good;
    good.push_back(val_item(100, 100));
    for (int i = 0; i < 9; ++i) good.push_back(val_item(i, 0));
    input.validation = &good;
    Rng r1(1);
    REQUIRE(select_gate(spec, preds, 5, r1, input).branch == "bate");

    // all the revenue hides at the bottom of the ranking
    std::vector<Example> bad;
    for (int i = 0; i < 9; ++i) bad.push_back(val_item(i + 2, 0));
    bad.push_back(val_item(0, 100));
    input.validation = &bad;
    Rng r2(1);
    const auto missed = select_gate(spec, preds, 5, r2, input);
    REQUIRE(missed.branch == "random");
    REQUIRE(missed.validation_score == 0.0);

    spec.gate_threshold = 0.0;
    input.validation = &good;
    Rng r3(1);
    REQUIRE(select_gate(spec, preds, 5, r3, input).branch == "bate");

    std::vector<Example> empty;
    input.validation = &empty;
    Rng r4(1);
    REQUIRE(select_gate(spec, preds, 5, r4, input).branch == "random_fallback");

    std::vector<Example> no_rev = {val_item(1, 0), val_item(2, 0)};
    input.validation = &no_rev;
    Rng r5(1);
    REQUIRE(select_gate(spec, preds, 5, r5, input).branch == "random");
}

TEST_CASE("strategy parsing mirrors the CLI mini-language", "[selection]") {
    const auto hybrid = make_strategy("hybrid", "DATE/bATE", "0.9/0.1");
    REQUIRE(hybrid.kind == StrategyKind::hybrid);
    REQUIRE(hybrid.children.size() == 2);
    REQUIRE(hybrid.children[0].kind == StrategyKind::exploit);
    REQUIRE(hybrid.children[1].kind == StrategyKind::bate);
    REQUIRE(hybrid.weights == std::vector<double>{0.9, 0.1});
    REQUIRE(strategy_name(hybrid) == "hybrid(exploit:0.9/bate:0.1)");

    REQUIRE(make_strategy("HYBRID", "date/GATE", "0.5/0.5").children[1].kind ==
            StrategyKind::gate);
    REQUIRE(make_strategy("exploit").kind == StrategyKind::exploit);
    REQUIRE(make_strategy("DATE").kind == StrategyKind::exploit);
    REQUIRE(make_strategy("random").kind == StrategyKind::random);
    REQUIRE(make_strategy("badge").kind == StrategyKind::badge);
    REQUIRE(strategy_name(make_strategy("bate")) == "bate");

    REQUIRE_THROWS_AS(make_strategy("hybrid", "DATE/bATE", "0.5/0.6"), std::invalid_argument);
    REQUIRE_THROWS_AS(make_strategy("hybrid", "DATE/bATE", "-0.5/1.5"), std::invalid_argument);
    REQUIRE_THROWS_AS(make_strategy("hybrid", "DATE/bATE", "0.9"), std::invalid_argument);
    REQUIRE_THROWS_AS(make_strategy("hybrid", "DATE/hybrid", "0.9/0.1"), std::invalid_argument);
    REQUIRE_THROWS_AS(make_strategy("foo"), std::invalid_argument);
    REQUIRE_THROWS_AS(make_strategy("hybrid", "", ""), std::invalid_argument);
}

TEST_CASE("hybrid selection splits the budget and stays disjoint", "[selection]") {
    Rng gen(20);
    std::vector<Prediction> preds;
    for (int i = 0; i < 200; ++i)
        preds.push_back(mk_pred(gen.uniform(), gen.uniform(0, 50),
                                {gen.normal(), gen.normal()}));

    SelectionInput input;
    input.predictions = &preds;
    input.budget = 100;
    input.select_seed = 41;
    input.tiebreak_seed = 42;

    const auto spec = make_strategy("hybrid", "DATE/bATE", "0.9/0.1");
    const auto result = select(spec, input);
    REQUIRE(result.indices.size() == 100);
    REQUIRE(std::set<int>(result.indices.begin(), result.indices.end()).size() == 100);
    int exploit_n = 0, bate_n = 0;
    for (const auto& tag : result.provenance) {
        if (tag == "exploit") ++exploit_n;
        if (tag == "bate") ++bate_n;
    }
    REQUIRE(exploit_n == 90);
    REQUIRE(bate_n == 10);

    input.budget = 9;
    const auto nine = select(spec, input);
    int exploit9 = 0, bate9 = 0;
    for (const auto& tag : nine.provenance) (tag == "exploit" ? exploit9 : bate9) += 1;
    REQUIRE(exploit9 == 8);
    REQUIRE(bate9 == 1);

    input.budget = 10;
    const auto ten = select(spec, input);
    int exploit10 = 0;
    for (const auto& tag : ten.provenance) exploit10 += tag == "exploit";
    REQUIRE(exploit10 == 9);
    REQUIRE(ten.indices.size() == 10);
}

TEST_CASE("degenerate hybrid weights reduce to pure exploitation", "[selection]") {
    Rng gen(23);
    std::vector<Prediction> preds;
    for (int i = 0; i < 50; ++i) preds.push_back(mk_pred(gen.uniform(), 1.0, {gen.normal()}));

    SelectionInput input;
    input.predictions = &preds;
    input.budget = 20;
    input.select_seed = 100;
    input.tiebreak_seed = 101;

    const auto pure = select(make_strategy("exploit"), input);
    const auto degenerate = select(make_strategy("hybrid", "DATE/random", "1.0/0.0"), input);
    REQUIRE(degenerate.indices == pure.indices);
}

TEST_CASE("hybrid propagates the gate branch and survives small pools", "[selection]") {
    std::vector<Prediction> preds;
    for (int i = 0; i < 5; ++i) preds.push_back(mk_pred(0.5, 1.0, {1.0 * i}));

    SelectionInput input;
    input.predictions = &preds;
    input.budget = 50;
    input.select_seed = 8;
    input.tiebreak_seed = 9;

    const auto result = select(make_strategy("hybrid", "DATE/gate", "0.9/0.1"), input);
    REQUIRE(result.indices.size() == 5);
    REQUIRE(result.gate_branch == "random_fallback");

    std::vector<Prediction> none;
    input.predictions = &none;
    REQUIRE(select(make_strategy("exploit"), input).indices.empty());
}
