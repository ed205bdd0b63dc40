#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kt/gradcheck.hpp"
#include "kt/graph.hpp"
#include "kt/params.hpp"
#include "kt/rng.hpp"

using namespace kt;

TEST_CASE("sigmoid(0) is exactly 0.5") {
    Graph g;
    Var x = g.leaf(Tensor::row({0.0, 2.0, -2.0}));
    Var y = g.sigmoid(x);
    REQUIRE(g.value(y).data[0] == 0.5);
    REQUIRE(g.value(y).data[1] == Catch::Approx(1.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("softmax of a constant row is uniform") {
    Graph g;
    Var x = g.leaf(Tensor::row({0.0, 0.0, 0.0}));
    Var y = g.softmax_rows(x);
    for (double v : g.value(y).data) REQUIRE(v == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("bce matches -ln y for a confident positive") {
    Graph g;
    Var p = g.leaf(Tensor::column({0.8}));
    Var loss = g.bce_masked(p, Tensor::column({1.0}), Tensor::column({1.0}));
    REQUIRE(g.value(loss).data[0] == Catch::Approx(-std::log(0.8)).epsilon(1e-12));
}

TEST_CASE("shape mismatch names both shapes") {
    Graph g;
    Var a = g.leaf(Tensor::zeros(2, 3));
    Var b = g.leaf(Tensor::zeros(4, 2));
    REQUIRE_THROWS_WITH(g.matmul(a, b),
                        Catch::Matchers::ContainsSubstring("[2x3]") &&
                            Catch::Matchers::ContainsSubstring("[4x2]"));
}

TEST_CASE("gradient of sum(W x) broadcasts x") {
    // loss = mean of W*x scaled to a sum; dloss/dW[i][j] = x[j]
    Graph g;
    ParamStore store;
    Rng rng(5);
    add_glorot(store, "W", 3, 4, rng);
    BoundParams bp(g, store);
    Var W = bp("W");
    Tensor xt = Tensor::zeros(4, 1);
    xt.data = {1.0, -2.0, 0.5, 3.0};
    Var x = g.leaf(xt);
    Var prod = g.matmul(W, x);            // [3,1]
    Var loss = g.scale(g.mean_all(prod), 3.0);  // = sum over rows of W.x / 1
    g.backward(loss);
    Tensor gw = g.grad(W);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) REQUIRE(gw.at(i, j) == Catch::Approx(xt.data[j]));
}

TEST_CASE("parameter not reaching the loss has exactly zero gradient") {
    Graph g;
    ParamStore store;
    Rng rng(5);
    add_glorot(store, "used", 2, 2, rng);
    add_glorot(store, "unused", 2, 2, rng);
    BoundParams bp(g, store);
    Var u = bp("used");
    bp("unused");
    Var loss = g.mean_all(g.tanh_(u));
    g.backward(loss);
    auto grads = bp.grads();
    for (double v : grads.at("unused").data) REQUIRE(v == 0.0);
}

TEST_CASE("masked softmax rows sum to one over unmasked entries and ignore masked logits") {
    Graph g;
    Tensor logits = Tensor::zeros(2, 4);
    logits.data = {1.0, 2.0, 3.0, 1e9, 0.5, -0.5, 1e9, 1e9};
    Tensor mask = Tensor::zeros(2, 4);
    mask.data = {1, 1, 1, 0, 1, 1, 0, 0};
    Var y = g.masked_softmax_rows(g.leaf(logits), mask);
    const Tensor& t = g.value(y);
    REQUIRE(t.at(0, 3) == 0.0);
    REQUIRE(t.at(1, 2) == 0.0);
    REQUIRE(t.at(0, 0) + t.at(0, 1) + t.at(0, 2) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(t.at(1, 0) + t.at(1, 1) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random composite graph passes a finite-difference check") {
    // Builds sigmoid/tanh/matmul/concat/softmax/bce graph over random params.
    ParamStore store;
    Rng rng(123);
    add_glorot(store, "W1", 3, 5, rng);
    add_glorot(store, "W2", 8, 4, rng);
    add_glorot(store, "b", 1, 4, rng);
    add_glorot(store, "E", 6, 3, rng);

    Tensor targets = Tensor::zeros(2, 1);
    targets.data = {1.0, 0.0};
    Tensor mask = Tensor::zeros(2, 1);
    mask.data = {1.0, 1.0};

    auto build = [&](ParamStore& s, Graph& g, BoundParams& bp) {
        Var e = g.rows_lookup(bp("E"), {1, 4});        // [2,3]
        Var h = g.tanh_(g.matmul(e, bp("W1")));        // [2,5]
        Var cat = g.concat_cols(h, e);                 // [2,8]
        Var z = g.add_bias(g.matmul(cat, bp("W2")), bp("b"));  // [2,4]
        Var sm = g.softmax_rows(z);
        Var p = g.sigmoid(g.select_cols(sm, {0, 2}));
        (void)s;
        return g.bce_masked(p, targets, mask);
    };
    Graph g;
    BoundParams bp(g, store);
    Var loss = build(store, g, bp);
    g.backward(loss);
    auto grads = bp.grads();

    auto loss_fn = [&](ParamStore& s) {
        Graph g2;
        BoundParams bp2(g2, s);
        return g2.value(build(s, g2, bp2)).data[0];
    };
    GradCheckResult res = gradient_check(store, loss_fn, grads);
    INFO("worst " << res.worst << " at " << res.worst_param);
    REQUIRE(res.ok());
}

TEST_CASE("attn_read and mem_write pass a finite-difference check through a full cycle") {
    ParamStore store;
    Rng rng(7);
    const int batch = 2, slots = 3, width = 4;
    add_glorot(store, "mem0", slots, width, rng);
    add_glorot(store, "key", batch, slots, rng);
    add_glorot(store, "erase", batch, width, rng);
    add_glorot(store, "add", batch, width, rng);

    Tensor targets = Tensor::zeros(batch, 1);
    targets.data = {1.0, 0.0};
    Tensor mask = Tensor::zeros(batch, 1);
    mask.data = {1.0, 1.0};

    auto build = [&](Graph& g, BoundParams& bp) {
        Var mem = g.tile_rows(bp("mem0"), batch);
        Var w = g.softmax_rows(bp("key"));
        Var r1 = g.attn_read(w, mem, slots);
        Var mem2 = g.mem_write(mem, w, g.sigmoid(bp("erase")), g.tanh_(bp("add")), slots,
                               /*weighted_add=*/false);
        Var r2 = g.attn_read(w, mem2, slots);
        Var p = g.sigmoid(g.mean_all(g.mul(r1, r2)));
        return g.bce_masked(g.concat_rows({p, p}), targets, mask);
    };
    Graph g;
    BoundParams bp(g, store);
    g.backward(build(g, bp));
    auto grads = bp.grads();
    auto loss_fn = [&](ParamStore& s) {
        Graph g2;
        BoundParams bp2(g2, s);
        return g2.value(build(g2, bp2)).data[0];
    };
    GradCheckResult res = gradient_check(store, loss_fn, grads);
    INFO("worst " << res.worst << " at " << res.worst_param);
    REQUIRE(res.ok());
    REQUIRE(res.over_hard == 0);
}

TEST_CASE("backward requires a scalar loss") {
    Graph g;
    Var a = g.leaf(Tensor::zeros(2, 2), true);
    REQUIRE_THROWS_AS(g.backward(a), InternalError);
}

TEST_CASE("dropout: rate 0 and inference mode are identities; zero fraction tracks rate") {
    Graph g;
    Rng rng(17);
    Tensor big = Tensor::zeros(100, 100);
    for (auto& x : big.data) x = 1.0;
    Var a = g.leaf(big, true);
    REQUIRE(g.dropout(a, 0.0, true, &rng).i == a.i);
    REQUIRE(g.dropout(a, 0.5, false, nullptr).i == a.i);

    Var d = g.dropout(a, 0.2, true, &rng);
    int zeros = 0;
    for (double v : g.value(d).data) {
        if (v == 0.0) ++zeros;
        else REQUIRE(v == Catch::Approx(1.0 / 0.8));
    }
    double frac = zeros / 10000.0;
    REQUIRE(frac > 0.18);
    REQUIRE(frac < 0.22);
}
