#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "patentkg/autodiff.hpp"
#include "patentkg/checkpoint.hpp"

using namespace patentkg;

TEST_CASE("softmax: constant inputs split evenly") {
    Array out = softmax(Array::vector_of({0.0, 0.0}));
    CHECK(out.data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.data[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax: singleton is exactly one") {
    for (double x : {-300.0, -1.5, 0.0, 7.25, 512.0}) {
        Array out = softmax(Array::vector_of({x}));
        CHECK(out.data[0] == 1.0);
    }
}

TEST_CASE("softmax: matches independent high-precision evaluation") {
    std::vector<double> in = {1.0, 2.0, 3.0};
    Array out = softmax(Array::vector_of(in));
    long double denom = 0.0L;
    for (double x : in) denom += expl(static_cast<long double>(x));
    for (std::size_t i = 0; i < in.size(); ++i) {
        long double expected = expl(static_cast<long double>(in[i])) / denom;
        CHECK(std::fabs(out.data[i] - static_cast<double>(expected)) < 1e-12);
    }
}

TEST_CASE("softmax: sums to one and is shift invariant") {
    DetRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + rng.next_below(12);
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(-40.0, 40.0);
        Array out = softmax(Array::vector_of(v));
        double sum = 0.0;
        for (double x : out.data) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);

        double shift = rng.uniform(-5.0, 5.0);
        std::vector<double> shifted = v;
        for (double& x : shifted) x += shift;
        Array out2 = softmax(Array::vector_of(shifted));
        for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(out.data[i] - out2.data[i]) <= 1e-12);
    }
}

TEST_CASE("softmax: empty input is a shape error") {
    CHECK_THROWS_AS(softmax_values({}), shape_error);
}

TEST_CASE("leaky_relu: fixed points and slope") {
    Array out = leaky_relu(Array::vector_of({1.0, -1.0, 0.0}), 0.2);
    CHECK(out.data[0] == 1.0);
    CHECK(out.data[1] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(out.data[2] == 0.0);
    CHECK_THROWS_AS(leaky_relu(Array::vector_of({1.0}), 0.0), input_error);
    CHECK_THROWS_AS(leaky_relu(Array::vector_of({1.0}), 1.5), input_error);
}

TEST_CASE("sigmoid: midpoint, saturation, symmetry") {
    CHECK(sigmoid_scalar(0.0) == 0.5);
    CHECK(sigmoid_scalar(25.0) >= 1.0 - 1e-9);
    DetRng rng(3);
    for (int i = 0; i < 100; ++i) {
        double x = rng.uniform(-30.0, 30.0);
        CHECK(std::fabs(sigmoid_scalar(x) + sigmoid_scalar(-x) - 1.0) <= 1e-12);
        CHECK(sigmoid_scalar(x) > 0.0);
        CHECK(sigmoid_scalar(x) < 1.0);
    }
}

TEST_CASE("sq_l2_distance: examples and oracle") {
    Array u = Array::vector_of({1.0, 0.0});
    Array v = Array::vector_of({0.0, 1.0});
    CHECK(sq_l2_distance(u, u) == 0.0);
    CHECK(sq_l2_distance(u, v) == 2.0);
    CHECK_THROWS_AS(sq_l2_distance(u, Array::vector_of({1.0})), shape_error);

    DetRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + rng.next_below(20);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform(-3.0, 3.0);
            b[i] = rng.uniform(-3.0, 3.0);
        }
        Array ua = Array::vector_of(a), ub = Array::vector_of(b);
        long double expected = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
            expected += d * d;
        }
        CHECK(std::fabs(sq_l2_distance(ua, ub) - static_cast<double>(expected)) < 1e-12);
        CHECK(sq_l2_distance(ua, ub) == sq_l2_distance(ub, ua));
    }
}

TEST_CASE("backward: gradient of sum of squares is 2p") {
    ParamStore store(5);
    store.add("p", {4});
    Tape tape;
    Var p = tape.param(store, "p");
    Var loss = tape.dot(p, p);
    store.zero_grads();
    tape.backward(loss, store);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(store.grad("p").data[i] ==
              doctest::Approx(2.0 * store.value("p").data[i]).epsilon(1e-14));
}

TEST_CASE("backward: constant output leaves gradients zero") {
    ParamStore store(5);
    store.add("p", {3});
    Tape tape;
    tape.param(store, "p");  // on the tape but not in the output
    Var loss = tape.constant_scalar(7.0);
    store.zero_grads();
    tape.backward(loss, store);
    for (double g : store.grad("p").data) CHECK(g == 0.0);
}

TEST_CASE("backward: accumulates across calls without zeroing") {
    ParamStore store(5);
    store.add("p", {2});
    Tape tape;
    Var p = tape.param(store, "p");
    Var loss = tape.dot(p, p);
    store.zero_grads();
    tape.backward(loss, store);
    std::vector<double> once = store.grad("p").data;
    tape.backward(loss, store);
    for (std::size_t i = 0; i < 2; ++i) CHECK(store.grad("p").data[i] == 2.0 * once[i]);
}

TEST_CASE("backward: non-scalar output is a shape error") {
    ParamStore store(5);
    store.add("p", {3});
    Tape tape;
    Var p = tape.param(store, "p");
    CHECK_THROWS_AS(tape.backward(p, store), shape_error);
}

TEST_CASE("grad_check: quadratic passes at 1e-6") {
    ParamStore store(9);
    store.add("p", {5});
    auto f = [](Tape& t, ParamStore& s) {
        Var p = t.param(s, "p");
        return t.dot(p, p);
    };
    GradCheckReport report = grad_check(f, store, 1e-6);
    CHECK(report.pass);
}

TEST_CASE("grad_check: corrupted gradient rule fails") {
    ParamStore store(9);
    store.add("p", {4});
    // Value x^2 but derivative deliberately 3x.
    auto f = [](Tape& t, ParamStore& s) {
        Var p = t.param(s, "p");
        Var sq = t.apply_elementwise(
            p, [](double x) { return x * x; }, [](double x) { return 3.0 * x; });
        return t.sum(sq);
    };
    GradCheckReport report = grad_check(f, store, 1e-4);
    CHECK_FALSE(report.pass);
    CHECK(report.worst_param == "p");
}

// Every kernel with a gradient rule, over 20 seeded configurations.
TEST_CASE("grad_check: individual kernels pass at 1e-4 over 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ParamStore store(seed);
        store.add("x", {6});
        store.add("y", {6});
        store.add("w", {6, 4});
        store.add("c", {3});

        auto run = [&](const char* label, const std::function<Var(Tape&, ParamStore&)>& f) {
            GradCheckReport r = grad_check(f, store, 1e-4);
            INFO(label << " seed " << seed << " max rel err " << r.max_rel_error << " at "
                       << r.worst_param << "[" << r.worst_index << "]");
            CHECK(r.pass);
        };

        run("add", [](Tape& t, ParamStore& s) {
            return t.sum(t.add(t.param(s, "x"), t.param(s, "y")));
        });
        run("sub+mul", [](Tape& t, ParamStore& s) {
            return t.sum(t.mul(t.sub(t.param(s, "x"), t.param(s, "y")), t.param(s, "x")));
        });
        run("scale+offset", [](Tape& t, ParamStore& s) {
            return t.sum(t.add_scalar_offset(t.scale(t.param(s, "x"), -2.5), 0.75));
        });
        run("concat+slice", [](Tape& t, ParamStore& s) {
            Var cat = t.concat(t.param(s, "x"), t.param(s, "y"));
            return t.sum(t.mul(t.slice(cat, 3, 6), t.slice(cat, 0, 6)));
        });
        run("dot", [](Tape& t, ParamStore& s) { return t.dot(t.param(s, "x"), t.param(s, "y")); });
        run("matvec_t", [](Tape& t, ParamStore& s) {
            Var y = t.matvec_t(t.param(s, "w"), t.param(s, "x"), 6, 4);
            return t.dot(y, y);
        });
        run("softmax", [](Tape& t, ParamStore& s) {
            Var sm = t.softmax(t.param(s, "x"));
            return t.dot(sm, t.param(s, "y"));
        });
        run("sigmoid", [](Tape& t, ParamStore& s) { return t.sum(t.sigmoid(t.param(s, "x"))); });
        run("leaky_relu", [](Tape& t, ParamStore& s) {
            return t.sum(t.leaky_relu(t.param(s, "x"), 0.2));
        });
        run("hinge", [](Tape& t, ParamStore& s) {
            return t.sum(t.hinge(t.sub(t.param(s, "x"), t.param(s, "y"))));
        });
        run("sq_l2", [](Tape& t, ParamStore& s) {
            return t.sq_l2(t.param(s, "x"), t.param(s, "y"));
        });
        run("weighted_sum+stack", [](Tape& t, ParamStore& s) {
            Var c = t.param(s, "c");
            Var x = t.param(s, "x");
            std::vector<Var> vecs = {t.slice(x, 0, 2), t.slice(x, 2, 2), t.slice(x, 4, 2)};
            Var ws = t.weighted_sum(t.softmax(c), vecs);
            Var parts = t.stack({t.slice(ws, 0, 1), t.slice(ws, 1, 1)});
            return t.dot(parts, parts);
        });
    }
}

TEST_CASE("grad_check: random composite graph matches finite differences") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        ParamStore store(seed);
        store.add("emb", {4, 5});
        store.add("w", {5, 3});
        store.add("a", {6});
        auto f = [](Tape& t, ParamStore& s) {
            Var r0 = t.param_row(s, "emb", 0);
            Var r1 = t.param_row(s, "emb", 1);
            Var r2 = t.param_row(s, "emb", 2);
            Var w = t.param(s, "w");
            Var z0 = t.matvec_t(w, r0, 5, 3);
            Var z1 = t.matvec_t(w, r1, 5, 3);
            Var z2 = t.matvec_t(w, r2, 5, 3);
            Var a = t.param(s, "a");
            Var al = t.slice(a, 0, 3);
            Var ar = t.slice(a, 3, 3);
            std::vector<Var> logits = {t.add(t.dot(al, z0), t.dot(ar, z1)),
                                       t.add(t.dot(al, z0), t.dot(ar, z2))};
            Var alpha = t.softmax(t.leaky_relu(t.stack(logits), 0.2));
            Var mixed = t.sigmoid(t.weighted_sum(alpha, {z1, z2}));
            return t.hinge(t.add_scalar_offset(t.sq_l2(mixed, z0), -0.5));
        };
        GradCheckReport r = grad_check(f, store, 1e-4);
        INFO("seed " << seed << " max rel err " << r.max_rel_error << " at " << r.worst_param);
        CHECK(r.pass);
    }
}

TEST_CASE("ParamStore: identical seeds give bitwise-identical initialization") {
    ParamStore a(1234), b(1234);
    a.add("x", {8, 8});
    a.add("y", {5});
    b.add("x", {8, 8});
    b.add("y", {5});
    CHECK(a == b);
    ParamStore c(1235);
    c.add("x", {8, 8});
    CHECK_FALSE(c.value("x") == a.value("x"));
}

TEST_CASE("ParamStore: checkpoint round-trips 64-bit values exactly") {
    ParamStore store(77);
    store.add("alpha", {3, 4});
    store.add("beta", {7});
    store.value("beta").data[0] = 0.1 + 0.2;  // no short decimal form
    std::filesystem::path path = std::filesystem::temp_directory_path() / "pkg_store_rt.json";
    save_param_store(store, path.string());
    ParamStore loaded = load_param_store(path.string());
    CHECK(loaded == store);
    CHECK(loaded.seed() == store.seed());
    std::filesystem::remove(path);
}

TEST_CASE("ParamStore: checkpoint rejects a tampered version header") {
    nlohmann::json j = param_store_to_json(ParamStore(1));
    j["version"] = 999;
    CHECK_THROWS_AS(param_store_from_json(j), format_error);
}

TEST_CASE("Array: invariants") {
    CHECK_THROWS_AS(Array({2, 2}, {1.0}), shape_error);
    Array ok({2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(ok.size() == 4);
    CHECK(ok.at(1, 0) == 3.0);
    Array bad = Array::vector_of({1.0, std::nan("")});
    CHECK_FALSE(bad.all_finite());
    CHECK_THROWS_AS(bad.require_finite("test"), numeric_error);
}
