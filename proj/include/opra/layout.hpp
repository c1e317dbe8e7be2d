#pragma once

#include "opra/common.hpp"
#include "opra/corpus.hpp"
#include "opra/kernels.hpp"
#include "opra/matrix.hpp"
#include "opra/vec2.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace opra {

/// Eight unit vertices, counterclockwise from angle 0 in steps of 45 degrees.
/// `order[i]` names the (concept, side) drawn at vertex i.
struct OctagonGeometry {
    struct Slot {
        Concept concept_id = Concept::trust;
        LabelSide side = LabelSide::true_side;
    };

    std::array<Vec2, 8> vertices{};
    std::array<Slot, 8> order{};

    /// T+, S+, C+, CM+, T-, S-, C-, CM-: every concept's pair is opposite.
    static OctagonGeometry standard();

    /// Builds the geometry for a custom slot order. Throws unless every
    /// concept has exactly one True and one False slot.
    static OctagonGeometry with_order(const std::array<Slot, 8>& order);

    std::size_t vertex_index(Concept c, LabelSide side) const;
    Vec2 vertex(Concept c, LabelSide side) const { return vertices[vertex_index(c, side)]; }
};

struct GravityParams {
    double alpha_base = 2.0;
    double g = 1.0;
    double gamma = 0.8;
    double delta = 0.1;
    double eps1 = 0.01;
    double eps2 = 1e-10;
    std::size_t max_iters = 200;
    double tol = 1e-4;

    /// Throws Error unless all values are positive and gamma < 1.
    void validate() const;
    kernels::GravityConstants constants() const { return {g, gamma, delta, eps1, eps2}; }
};

struct LayoutPoint {
    std::int64_t id = 0;
    Vec2 p;
    Vec2 u;
};

struct TsneOptions {
    /// <= 0 picks 30, or (n - 1) / 3 when n < 91.
    double perplexity = 0.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    std::uint64_t seed = 42;
    kernels::Backend backend = kernels::Backend::parallel;
};

double default_perplexity(std::size_t n);

/// Exact t-SNE to 2-D, centered and scaled so the farthest point sits at radius 0.9.
std::vector<Vec2> tsne_project(std::span<const std::vector<double>> embeddings, const TsneOptions& options = {});

/// Attractors for one point: one per concept column, in column order.
/// CoC above 0.5 pulls to the True vertex, below 0.5 to the False vertex,
/// exactly 0.5 contributes nothing.
kernels::Attractor attractor_for(double coc, Concept c, const OctagonGeometry& geom, const GravityParams& params);

/// One iteration for every point. `coc` has one row per point and one column
/// per entry of `concepts`. Returns the largest position change.
double gravity_step(std::span<LayoutPoint> points, const Matrix& coc, std::span<const Concept> concepts,
                    const OctagonGeometry& geom, const GravityParams& params,
                    kernels::Backend backend = kernels::Backend::parallel);

struct GravityRun {
    std::vector<LayoutPoint> points;
    std::size_t iterations = 0;
    bool converged = false;
    double last_change = 0.0;
};

/// Steps until the largest position change drops below tol or max_iters is hit.
GravityRun gravity_run(std::vector<LayoutPoint> points, const Matrix& coc, std::span<const Concept> concepts,
                       const OctagonGeometry& geom, const GravityParams& params,
                       kernels::Backend backend = kernels::Backend::parallel);

/// Orthogonal projection onto the segment from the False to the True vertex,
/// as a parameter in [0,1] (False = 0, True = 1).
double axis_projection(Vec2 p, Concept c, const OctagonGeometry& geom);
std::vector<double> axis_projection(std::span<const LayoutPoint> points, Concept c, const OctagonGeometry& geom);

enum class HistogramScale : std::uint8_t { linear, ln, log2, log10 };
std::string_view scale_name(HistogramScale s);
HistogramScale parse_scale(std::string_view s);

/// count under linear, log_b(count + 1) otherwise.
double scale_height(std::size_t count, HistogramScale scale);

struct HistogramBar {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double height = 0.0;
    /// Points of this bar split by CoC decile [0,0.1), ..., [0.9,1].
    std::array<std::size_t, 10> coc_deciles{};
};

struct Histogram {
    HistogramScale scale = HistogramScale::linear;
    std::vector<HistogramBar> bars;
};

/// Equal-width bins over [0,1]; values outside are clamped, 1.0 falls in the
/// last bin. `coc`, when not empty, must match `positions` in length.
Histogram histogram(std::span<const double> positions, std::size_t bins = 20,
                    HistogramScale scale = HistogramScale::linear, std::span<const double> coc = {});

struct Layout {
    std::vector<LayoutPoint> points;
    std::size_t iterations = 0;
    bool converged = false;
};

/// t-SNE of the active records' embeddings, then gravity on their scaled CoC.
/// Concepts without a CoC value for a record exert no force on it.
Layout compute_layout(const Dataset& ds, const OctagonGeometry& geom, const GravityParams& params,
                      const TsneOptions& tsne = {});

nlohmann::json to_json(const Layout& layout, const OctagonGeometry& geom);
Layout layout_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Histogram& h);

/// Octagon outline, vertex labels and the scatter of points.
std::string to_svg(const Layout& layout, const OctagonGeometry& geom, double size = 600.0);

}  // namespace opra
