#include "opra/layout.hpp"
#include "opra/pipeline.hpp"
#include "opra/providers.hpp"

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace opra;

namespace {

constexpr Concept kTrustOnly[] = {Concept::trust};

Matrix column(std::initializer_list<double> values) {
    Matrix m(values.size(), 1);
    std::size_t i = 0;
    for (double v : values) m(i++, 0) = v;
    return m;
}

double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

}  // namespace

TEST_CASE("standard octagon puts each concept's pair opposite") {
    const auto geom = OctagonGeometry::standard();
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(geom.vertices[i].norm() - 1.0) < 1e-15);
    for (Concept c : kAllConcepts) {
        const Vec2 t = geom.vertex(c, LabelSide::true_side);
        const Vec2 f = geom.vertex(c, LabelSide::false_side);
        CHECK(distance(t, -f) < 1e-15);
    }
    CHECK(geom.vertex_index(Concept::trust, LabelSide::true_side) == 0);
    CHECK(geom.vertex_index(Concept::control_mutuality, LabelSide::false_side) == 7);
    auto bad = geom.order;
    bad[1] = bad[0];
    CHECK_THROWS(OctagonGeometry::with_order(bad));
}

TEST_CASE("gravity parameters") {
    CHECK_NOTHROW(GravityParams{}.validate());
    GravityParams p;
    p.gamma = 1.0;
    CHECK_THROWS(p.validate());
    p = {};
    p.eps1 = 0.0;
    CHECK_THROWS(p.validate());
}

TEST_CASE("one step from rest matches the hand evaluation") {
    const auto geom = OctagonGeometry::standard();
    const GravityParams params;
    for (auto backend : {kernels::Backend::serial, kernels::Backend::parallel}) {
        std::vector<LayoutPoint> pts{{0, {0, 0}, {0, 0}}};
        gravity_step(pts, column({1.0}), kTrustOnly, geom, params, backend);
        const double want = oracle::first_step_x(1.0, params.alpha_base, params.g, params.delta, params.eps1);
        CHECK(std::abs(pts[0].p.x - want) < 1e-12);
        CHECK(std::abs(pts[0].p.x - 0.09803) < 1e-5);
        CHECK(std::abs(pts[0].p.y) < 1e-12);
    }
    SUBCASE("CoC 0 pulls the other way by the same amount") {
        std::vector<LayoutPoint> pts{{0, {0, 0}, {0, 0}}};
        gravity_step(pts, column({0.0}), kTrustOnly, geom, params);
        CHECK(std::abs(pts[0].p.x + oracle::first_step_x(0.0, 2.0, 1.0, 0.1, 0.01)) < 1e-12);
    }
}

TEST_CASE("CoC 0.5 is a fixed point") {
    const auto geom = OctagonGeometry::standard();
    Matrix coc(3, 4, 0.5);
    std::vector<LayoutPoint> pts{{0, {0.3, -0.2}, {}}, {1, {0, 0}, {}}, {2, {-0.7, 0.1}, {}}};
    const auto run = gravity_run(pts, coc, kAllConcepts, geom, GravityParams{});
    CHECK(run.iterations == 1);
    CHECK(run.converged);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(run.points[i].p == pts[i].p);
    CHECK(attractor_for(0.5, Concept::trust, geom, GravityParams{}).mass == 0.0);
}

TEST_CASE("point at its target stays finite") {
    const auto geom = OctagonGeometry::standard();
    const auto f = kernels::gravity_force({1, 0}, {{1, 0}, 1.0}, GravityParams{}.constants());
    CHECK(f.magnitude == doctest::Approx(1.0 / (0.01 * 0.01)));
    CHECK(std::isfinite(f.vector.x));
    std::vector<LayoutPoint> pts{{0, {1, 0}, {}}};
    gravity_step(pts, column({1.0}), kTrustOnly, geom, GravityParams{});
    CHECK(std::isfinite(pts[0].p.x));
}

TEST_CASE("single attraction from rest moves closer") {
    const auto geom = OctagonGeometry::standard();
    const Vec2 start{-0.2, 0.4};
    const Vec2 target = geom.vertex(Concept::satisfaction, LabelSide::false_side);
    std::vector<LayoutPoint> pts{{0, start, {}}};
    const Concept sat[] = {Concept::satisfaction};
    gravity_step(pts, column({0.1}), sat, geom, GravityParams{});
    CHECK(distance(pts[0].p, target) < distance(start, target));
    const auto run = gravity_run({{0, start, {}}}, column({0.1}), sat, geom, GravityParams{});
    CHECK(distance(run.points[0].p, target) < distance(start, target));
}

TEST_CASE("200 random points stay in the unit disk") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-0.6, 0.6), c(0, 1);
    std::vector<LayoutPoint> pts;
    Matrix coc(200, 4);
    for (std::int64_t i = 0; i < 200; ++i) {
        pts.push_back({i, {u(rng), u(rng)}, {}});
        // dyadic values keep 1 - c exact for the reflection check
        for (std::size_t j = 0; j < 4; ++j) coc(i, j) = std::round(c(rng) * 64.0) / 64.0;
    }
    const auto geom = OctagonGeometry::standard();
    const auto run = gravity_run(pts, coc, kAllConcepts, geom, GravityParams{});
    CHECK(run.iterations <= 200);
    CHECK(run.iterations >= 1);
    for (const auto& p : run.points) CHECK(p.p.norm() <= 1.0 + 1e-9);

    SUBCASE("serial and parallel runs are bit-identical") {
        const auto serial = gravity_run(pts, coc, kAllConcepts, geom, GravityParams{}, kernels::Backend::serial);
        REQUIRE(serial.iterations == run.iterations);
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK(serial.points[i].p == run.points[i].p);
    }
    SUBCASE("reflecting labels reflects the trajectory") {
        Matrix flipped = coc;
        for (double& v : flipped.data()) v = 1.0 - v;
        std::vector<LayoutPoint> mirrored = pts;
        for (auto& p : mirrored) p.p = -p.p;
        const auto back = gravity_run(mirrored, flipped, kAllConcepts, geom, GravityParams{});
        REQUIRE(back.iterations == run.iterations);
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK(back.points[i].p == -run.points[i].p);
    }
}

TEST_CASE("axis projection") {
    const auto geom = OctagonGeometry::standard();
    const Vec2 t = geom.vertex(Concept::commitment, LabelSide::true_side);
    const Vec2 f = geom.vertex(Concept::commitment, LabelSide::false_side);
    CHECK(axis_projection(t, Concept::commitment, geom) == doctest::Approx(1.0));
    CHECK(axis_projection(f, Concept::commitment, geom) == doctest::Approx(0.0));
    CHECK(axis_projection(Vec2{0, 0}, Concept::commitment, geom) == doctest::Approx(0.5));
    const Vec2 foot = f + (t - f) * 0.3;
    const Vec2 normal{-(t - f).y, (t - f).x};
    CHECK(axis_projection(foot + normal * 0.2, Concept::commitment, geom) ==
          doctest::Approx(axis_projection(foot, Concept::commitment, geom)).epsilon(1e-12));
    CHECK(axis_projection(t * 3.0, Concept::commitment, geom) == 1.0);
}

TEST_CASE("histogram scale identities") {
    for (std::size_t count : {0u, 1u, 999u, 1000u}) {
        const double x = static_cast<double>(count + 1);
        CHECK(scale_height(count, HistogramScale::linear) == static_cast<double>(count));
        CHECK(scale_height(count, HistogramScale::ln) == std::log(x));
        CHECK(scale_height(count, HistogramScale::log2) == std::log2(x));
        CHECK(scale_height(count, HistogramScale::log10) == std::log10(x));
        CHECK(std::abs(std::exp(scale_height(count, HistogramScale::ln)) - x) < 1e-9 * x);
        CHECK(std::abs(std::pow(2.0, scale_height(count, HistogramScale::log2)) - x) < 1e-9 * x);
        CHECK(std::abs(std::pow(10.0, scale_height(count, HistogramScale::log10)) - x) < 1e-9 * x);
    }
    CHECK(scale_height(0, HistogramScale::log10) == 0.0);
    CHECK(scale_height(1, HistogramScale::log2) == 1.0);
    CHECK(scale_height(999, HistogramScale::log10) == 3.0);

    const std::vector<double> many(1000, 0.42);
    const auto one = histogram(many, 1, HistogramScale::log10);
    REQUIRE(one.bars.size() == 1);
    CHECK(one.bars[0].height == doctest::Approx(3.0004).epsilon(1e-4));
    for (auto s : {HistogramScale::linear, HistogramScale::ln, HistogramScale::log2, HistogramScale::log10})
        CHECK(parse_scale(scale_name(s)) == s);
}

TEST_CASE("histogram bins") {
    const std::vector<double> pos{0.0, 0.05, 0.5, 0.99, 1.0, 1.2, -0.1};
    const std::vector<double> coc{0.05, 0.5, 0.5, 1.0, 0.95, 0.3, 0.0};
    const auto h = histogram(pos, 10, HistogramScale::linear, coc);
    REQUIRE(h.bars.size() == 10);
    double sum = 0;
    for (const auto& b : h.bars) sum += b.height;
    CHECK(sum == 7.0);
    CHECK(h.bars[0].count == 3);
    CHECK(h.bars[9].count == 3);
    CHECK(h.bars[9].coc_deciles[9] == 2);
    CHECK(h.bars[3].height == 0.0);
    CHECK(histogram(pos, 10, HistogramScale::ln).bars[3].height == 0.0);
    CHECK_THROWS(histogram(pos, 0));
}

TEST_CASE("t-SNE") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.3);
    std::vector<std::vector<double>> emb;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> v(8);
        for (auto& x : v) x = n(rng) + (i < 20 ? 3.0 : -3.0);
        emb.push_back(v);
    }
    TsneOptions opt;
    opt.iterations = 400;
    const auto a = tsne_project(emb, opt);
    CHECK(a == tsne_project(emb, opt));

    double rmax = 0;
    for (auto p : a) rmax = std::max(rmax, p.norm());
    CHECK(rmax == doctest::Approx(0.9).epsilon(1e-12));

    // 5-nearest-neighbour purity
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t j = 0; j < a.size(); ++j)
            if (j != i) d.push_back({distance(a[i], a[j]), j});
        std::partial_sort(d.begin(), d.begin() + 5, d.end());
        for (int k = 0; k < 5; ++k) same += (d[k].second < 20) == (i < 20);
    }
    CHECK(static_cast<double>(same) / (5.0 * a.size()) >= 0.9);

    SUBCASE("serial backend gives the same map") {
        opt.backend = kernels::Backend::serial;
        CHECK(tsne_project(emb, opt) == a);
    }
    SUBCASE("preconditions") {
        CHECK_THROWS(tsne_project(std::vector<std::vector<double>>(emb.begin(), emb.begin() + 3)));
        auto bad = emb;
        bad[2][1] = std::nan("");
        CHECK_THROWS(tsne_project(bad));
        opt.perplexity = 40;
        CHECK_THROWS(tsne_project(emb, opt));
    }
    CHECK(default_perplexity(40) == doctest::Approx(13.0));
    CHECK(default_perplexity(500) == 30.0);
}

TEST_CASE("serial and parallel kernels agree") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    std::vector<std::vector<double>> v(30, std::vector<double>(6));
    for (auto& row : v)
        for (auto& x : row) x = n(rng);
    using kernels::Backend;
    CHECK(kernels::cosine_distances(v, Backend::serial) == kernels::cosine_distances(v, Backend::parallel));
    const Matrix d = kernels::squared_distances(v, Backend::serial);
    CHECK(d == kernels::squared_distances(v, Backend::parallel));
    const Matrix p = kernels::conditional_affinities(d, 8.0, Backend::serial);
    CHECK(p == kernels::conditional_affinities(d, 8.0, Backend::parallel));
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0;
        for (double x : p.row(i)) s += x;
        CHECK(std::abs(s - 1.0) < 1e-12);
        CHECK(p(i, i) == 0.0);
    }
    std::vector<double> y(60), g1(60), g2(60);
    for (auto& x : y) x = n(rng);
    kernels::tsne_gradient(p, y, g1, Backend::serial);
    kernels::tsne_gradient(p, y, g2, Backend::parallel);
    CHECK(g1 == g2);
}

TEST_CASE("layout over a dataset") {
    Dataset ds = load(fixtures::path("google/dataset.json"));
    ds.records.resize(30);
    embed_all(ds, ReferenceEmbedder(32));
    for (auto& r : ds.records)
        for (Concept c : kAllConcepts) r.coc[c] = 0.5;
    ds.records[0].coc[Concept::trust] = 1.0;
    ds.records[1].excluded = true;
    TsneOptions opt;
    opt.iterations = 200;
    const auto geom = OctagonGeometry::standard();
    const Layout lay = compute_layout(ds, geom, GravityParams{}, opt);
    CHECK(lay.points.size() == 29);
    for (const auto& p : lay.points) CHECK(p.p.norm() <= 1.0 + 1e-9);

    const auto doc = to_json(lay, geom);
    CHECK(doc["points"].size() == 29);
    CHECK(doc["vertices"].size() == 8);
    const Layout back = layout_from_json(doc);
    REQUIRE(back.points.size() == 29);
    CHECK(back.points[5].p == lay.points[5].p);
    CHECK(to_svg(lay, geom).find("<svg") == 0);

    ds.records[7].embedding.clear();
    CHECK_THROWS_WITH(compute_layout(ds, geom, GravityParams{}, opt), doctest::Contains("embed before layout"));
}
