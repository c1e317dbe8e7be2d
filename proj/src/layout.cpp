#include "opra/layout.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace opra {

using nlohmann::json;

namespace {

std::vector<kernels::Attractor> build_attractors(std::size_t n, const Matrix& coc, std::span<const Concept> concepts,
                                                 const OctagonGeometry& geom, const GravityParams& params) {
    if (coc.rows() != n || coc.cols() != concepts.size())
        throw Error("CoC matrix is " + std::to_string(coc.rows()) + "x" + std::to_string(coc.cols()) + ", expected " +
                    std::to_string(n) + "x" + std::to_string(concepts.size()));
    std::vector<kernels::Attractor> out;
    out.reserve(n * concepts.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < concepts.size(); ++c)
            out.push_back(attractor_for(coc(i, c), concepts[c], geom, params));
    return out;
}

// Uniform in [0,1) from the top 53 bits; avoids the implementation-defined
// std::normal_distribution so seeds give the same map everywhere.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << v;
    return os.str();
}

}  // namespace

OctagonGeometry OctagonGeometry::standard() {
    std::array<Slot, 8> order{};
    for (std::size_t i = 0; i < 4; ++i) {
        order[i] = {kAllConcepts[i], LabelSide::true_side};
        order[i + 4] = {kAllConcepts[i], LabelSide::false_side};
    }
    return with_order(order);
}

OctagonGeometry OctagonGeometry::with_order(const std::array<Slot, 8>& order) {
    OctagonGeometry g;
    g.order = order;
    const double s = std::sqrt(0.5);
    const std::array<Vec2, 4> half{Vec2{1.0, 0.0}, Vec2{s, s}, Vec2{0.0, 1.0}, Vec2{-s, s}};
    for (std::size_t i = 0; i < 4; ++i) {
        g.vertices[i] = half[i];
        g.vertices[i + 4] = -half[i];
    }
    for (Concept c : kAllConcepts) {
        for (LabelSide side : {LabelSide::true_side, LabelSide::false_side}) {
            const auto hits = std::count_if(order.begin(), order.end(), [&](const Slot& slot) {
                return slot.concept_id == c && slot.side == side;
            });
            if (hits != 1)
                throw Error("octagon order must give " + std::string(concept_id(c)) + " exactly one " +
                            std::string(side_name(side)) + " vertex");
        }
    }
    return g;
}

std::size_t OctagonGeometry::vertex_index(Concept c, LabelSide side) const {
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i].concept_id == c && order[i].side == side) return i;
    throw Error("octagon has no vertex for " + std::string(concept_id(c)));
}

void GravityParams::validate() const {
    if (!(alpha_base > 0 && g > 0 && gamma > 0 && delta > 0 && eps1 > 0 && eps2 > 0 && tol > 0 && max_iters > 0))
        throw Error("gravity parameters must all be positive");
    if (!(gamma < 1.0)) throw Error("gravity damping gamma must be < 1");
}

double default_perplexity(std::size_t n) { return n < 91 ? static_cast<double>(n - 1) / 3.0 : 30.0; }

std::vector<Vec2> tsne_project(std::span<const std::vector<double>> embeddings, const TsneOptions& options) {
    const std::size_t n = embeddings.size();
    if (n < 4) throw Error("t-SNE needs at least 4 points, got " + std::to_string(n));
    for (const auto& e : embeddings) {
        if (e.size() != embeddings.front().size()) throw Error("t-SNE embeddings differ in dimension");
        for (double v : e)
            if (!std::isfinite(v)) throw Error("t-SNE embedding has a non-finite entry");
    }
    const double perplexity = options.perplexity > 0.0 ? options.perplexity : default_perplexity(n);
    if (!(perplexity < static_cast<double>(n))) throw Error("perplexity must be below the point count");

    const Matrix dist = kernels::squared_distances(embeddings, options.backend);
    const Matrix cond = kernels::conditional_affinities(dist, perplexity, options.backend);
    Matrix p(n, n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            p(i, j) = cond(i, j) + cond(j, i);
            total += p(i, j);
        }
    for (double& v : p.data()) v /= total;

    std::mt19937_64 rng(options.seed);
    std::vector<double> y(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u1 = 1.0 - unit_uniform(rng);
        const double u2 = unit_uniform(rng);
        const double r = std::sqrt(-2.0 * std::log(u1));
        y[2 * i] = 1e-4 * r * std::cos(2.0 * std::numbers::pi * u2);
        y[2 * i + 1] = 1e-4 * r * std::sin(2.0 * std::numbers::pi * u2);
    }

    std::vector<double> grad(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0);
    Matrix exaggerated = p;
    for (double& v : exaggerated.data()) v *= options.exaggeration;

    for (std::size_t iter = 0; iter < options.iterations; ++iter) {
        const bool early = iter < options.exaggeration_iters;
        kernels::tsne_gradient(early ? exaggerated : p, y, grad, options.backend);
        const double momentum = early ? 0.5 : 0.8;
        for (std::size_t k = 0; k < 2 * n; ++k) {
            const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
            gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
            gains[k] = std::max(gains[k], 0.01);
            update[k] = momentum * update[k] - options.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y[2 * i];
            my += y[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[2 * i] -= mx;
            y[2 * i + 1] -= my;
        }
    }

    std::vector<Vec2> out(n);
    double radius = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = {y[2 * i], y[2 * i + 1]};
        radius = std::max(radius, out[i].norm());
    }
    if (radius > 0.0)
        for (auto& v : out) v = v * (0.9 / radius);
    return out;
}

kernels::Attractor attractor_for(double coc, Concept c, const OctagonGeometry& geom, const GravityParams& params) {
    if (coc == 0.5) return {};
    const LabelSide side = coc > 0.5 ? LabelSide::true_side : LabelSide::false_side;
    return {geom.vertex(c, side), std::abs(coc - 0.5) * params.alpha_base};
}

double gravity_step(std::span<LayoutPoint> points, const Matrix& coc, std::span<const Concept> concepts,
                    const OctagonGeometry& geom, const GravityParams& params, kernels::Backend backend) {
    const auto attractors = build_attractors(points.size(), coc, concepts, geom, params);
    std::vector<Vec2> pos(points.size()), vel(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        pos[i] = points[i].p;
        vel[i] = points[i].u;
    }
    const double change =
        kernels::gravity_step(pos, vel, attractors, concepts.size(), params.constants(), backend);
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i].p = pos[i];
        points[i].u = vel[i];
    }
    return change;
}

GravityRun gravity_run(std::vector<LayoutPoint> points, const Matrix& coc, std::span<const Concept> concepts,
                       const OctagonGeometry& geom, const GravityParams& params, kernels::Backend backend) {
    params.validate();
    const auto attractors = build_attractors(points.size(), coc, concepts, geom, params);
    std::vector<Vec2> pos(points.size()), vel(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        pos[i] = points[i].p;
        vel[i] = points[i].u;
    }
    GravityRun run;
    const auto k = params.constants();
    while (run.iterations < params.max_iters) {
        run.last_change = kernels::gravity_step(pos, vel, attractors, concepts.size(), k, backend);
        ++run.iterations;
        if (run.last_change < params.tol) {
            run.converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i].p = pos[i];
        points[i].u = vel[i];
    }
    run.points = std::move(points);
    return run;
}

double axis_projection(Vec2 p, Concept c, const OctagonGeometry& geom) {
    const Vec2 lo = geom.vertex(c, LabelSide::false_side);
    const Vec2 axis = geom.vertex(c, LabelSide::true_side) - lo;
    return std::clamp((p - lo).dot(axis) / axis.dot(axis), 0.0, 1.0);
}

std::vector<double> axis_projection(std::span<const LayoutPoint> points, Concept c, const OctagonGeometry& geom) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& pt : points) out.push_back(axis_projection(pt.p, c, geom));
    return out;
}

std::string_view scale_name(HistogramScale s) {
    switch (s) {
        case HistogramScale::linear: return "linear";
        case HistogramScale::ln: return "ln";
        case HistogramScale::log2: return "log2";
        case HistogramScale::log10: return "log10";
    }
    return "linear";
}

HistogramScale parse_scale(std::string_view s) {
    for (auto v : {HistogramScale::linear, HistogramScale::ln, HistogramScale::log2, HistogramScale::log10})
        if (scale_name(v) == s) return v;
    throw Error("unknown histogram scale: " + std::string(s));
}

double scale_height(std::size_t count, HistogramScale scale) {
    const double x = static_cast<double>(count) + 1.0;
    switch (scale) {
        case HistogramScale::linear: return static_cast<double>(count);
        case HistogramScale::ln: return std::log(x);
        case HistogramScale::log2: return std::log2(x);
        case HistogramScale::log10: return std::log10(x);
    }
    return 0.0;
}

Histogram histogram(std::span<const double> positions, std::size_t bins, HistogramScale scale,
                    std::span<const double> coc) {
    if (bins < 1) throw Error("histogram needs at least one bin");
    if (!coc.empty() && coc.size() != positions.size()) throw Error("histogram CoC list does not match positions");
    Histogram h;
    h.scale = scale;
    h.bars.resize(bins);
    const double width = 1.0 / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        h.bars[b].lo = static_cast<double>(b) * width;
        h.bars[b].hi = b + 1 == bins ? 1.0 : static_cast<double>(b + 1) * width;
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double x = std::clamp(positions[i], 0.0, 1.0);
        const auto b = std::min(bins - 1, static_cast<std::size_t>(x * static_cast<double>(bins)));
        ++h.bars[b].count;
        if (!coc.empty()) {
            const double c = std::clamp(coc[i], 0.0, 1.0);
            ++h.bars[b].coc_deciles[std::min<std::size_t>(9, static_cast<std::size_t>(c * 10.0))];
        }
    }
    for (auto& bar : h.bars) bar.height = scale_height(bar.count, scale);
    return h;
}

Layout compute_layout(const Dataset& ds, const OctagonGeometry& geom, const GravityParams& params,
                      const TsneOptions& tsne) {
    params.validate();
    std::vector<const SentenceRecord*> active;
    std::vector<std::vector<double>> embeddings;
    for (const auto& r : ds.records) {
        if (r.excluded) continue;
        if (r.embedding.empty()) throw Error("embed before layout (record " + std::to_string(r.id) + ")");
        active.push_back(&r);
        embeddings.push_back(r.embedding);
    }
    const auto start = tsne_project(embeddings, tsne);

    const std::vector<Concept> concepts = ds.concepts;
    Matrix coc(active.size(), concepts.size(), 0.5);
    std::vector<LayoutPoint> points(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        points[i] = {active[i]->id, start[i], {}};
        for (std::size_t c = 0; c < concepts.size(); ++c)
            coc(i, c) = active[i]->coc[concepts[c]].value_or(0.5);
    }
    auto run = gravity_run(std::move(points), coc, concepts, geom, params, tsne.backend);
    return {std::move(run.points), run.iterations, run.converged};
}

json to_json(const Layout& layout, const OctagonGeometry& geom) {
    json points = json::array();
    for (const auto& p : layout.points) points.push_back({{"id", p.id}, {"x", p.p.x}, {"y", p.p.y}});
    json vertices = json::array();
    for (std::size_t i = 0; i < geom.vertices.size(); ++i)
        vertices.push_back({{"concept", concept_id(geom.order[i].concept_id)},
                            {"side", side_name(geom.order[i].side)},
                            {"x", geom.vertices[i].x},
                            {"y", geom.vertices[i].y}});
    return {{"points", points}, {"vertices", vertices}, {"iterations", layout.iterations},
            {"converged", layout.converged}};
}

Layout layout_from_json(const json& doc) {
    try {
        Layout l;
        for (const auto& p : doc.at("points"))
            l.points.push_back({p.at("id").get<std::int64_t>(), {p.at("x").get<double>(), p.at("y").get<double>()}, {}});
        l.iterations = doc.at("iterations").get<std::size_t>();
        l.converged = doc.value("converged", false);
        return l;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed layout: ") + e.what());
    }
}

json to_json(const Histogram& h) {
    json bars = json::array();
    for (const auto& b : h.bars)
        bars.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"height", b.height},
                        {"coc_deciles", b.coc_deciles}});
    return {{"scale", scale_name(h.scale)}, {"bars", bars}};
}

std::string to_svg(const Layout& layout, const OctagonGeometry& geom, double size) {
    const double half = size / 2.0;
    const double r = half * 0.8;
    auto sx = [&](double x) { return fmt(half + x * r); };
    auto sy = [&](double y) { return fmt(half - y * r); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(size) << "\" height=\"" << fmt(size)
       << "\" viewBox=\"0 0 " << fmt(size) << ' ' << fmt(size) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<circle cx=\"" << sx(0) << "\" cy=\"" << sy(0) << "\" r=\"" << fmt(r)
       << "\" fill=\"none\" stroke=\"#ddd\"/>\n<polygon fill=\"none\" stroke=\"#555\" points=\"";
    for (const auto& v : geom.vertices) os << sx(v.x) << ',' << sy(v.y) << ' ';
    os << "\"/>\n";
    for (std::size_t i = 0; i < geom.vertices.size(); ++i) {
        const Vec2 v = geom.vertices[i] * 1.12;
        os << "<text x=\"" << sx(v.x) << "\" y=\"" << sy(v.y)
           << "\" font-size=\"12\" text-anchor=\"middle\" dominant-baseline=\"middle\">"
           << concept_marker(geom.order[i].concept_id)
           << (geom.order[i].side == LabelSide::true_side ? " +" : " -") << "</text>\n";
    }
    for (const auto& p : layout.points)
        os << "<circle cx=\"" << sx(p.p.x) << "\" cy=\"" << sy(p.p.y) << "\" r=\"3\" fill=\"#3366cc\" opacity=\"0.7\"/>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace opra
