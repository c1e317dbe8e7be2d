#pragma once

#include "opra/coc.hpp"
#include "opra/matrix.hpp"
#include "opra/vec2.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Data-parallel hot loops. Each kernel has a plain serial reference in
// `serial` and an OpenMP version in `parallel`; the unqualified functions
// dispatch on Backend. Parallel kernels never reduce across threads in an
// unspecified order, so their output does not depend on the thread count.

namespace opra::kernels {

enum class Backend { serial, parallel };

/// Threads OpenMP would use; 1 when built without OpenMP.
int max_threads();
bool openmp_enabled();

struct Attractor {
    Vec2 target;
    /// Gravitational mass; 0 means the concept exerts no force.
    double mass = 0.0;
};

struct GravityConstants {
    double g = 1.0;
    double gamma = 0.8;
    double delta = 0.1;
    double eps1 = 0.01;
    double eps2 = 1e-10;
};

struct Force {
    double magnitude = 0.0;
    Vec2 vector;
};

/// F = G * mass / (r + eps1)^2 along the unit direction to the target. The
/// direction divides by max(r, eps2), so it is exact for r >= eps2 and zero at
/// the target itself.
Force gravity_force(Vec2 position, const Attractor& attractor, const GravityConstants& k);

namespace serial {
Matrix cosine_distances(std::span<const std::vector<double>> vectors);
std::vector<double> coc_raw_batch(std::span<const std::vector<double>> sentences, const ConceptSpec& spec);
Matrix squared_distances(std::span<const std::vector<double>> vectors);
Matrix conditional_affinities(const Matrix& squared_distances, double perplexity);
void tsne_gradient(const Matrix& p, std::span<const double> y, std::span<double> grad);
double gravity_step(std::span<Vec2> positions, std::span<Vec2> velocities, std::span<const Attractor> attractors,
                    std::size_t per_point, const GravityConstants& k);
}  // namespace serial

namespace parallel {
Matrix cosine_distances(std::span<const std::vector<double>> vectors);
std::vector<double> coc_raw_batch(std::span<const std::vector<double>> sentences, const ConceptSpec& spec);
Matrix squared_distances(std::span<const std::vector<double>> vectors);
Matrix conditional_affinities(const Matrix& squared_distances, double perplexity);
void tsne_gradient(const Matrix& p, std::span<const double> y, std::span<double> grad);
double gravity_step(std::span<Vec2> positions, std::span<Vec2> velocities, std::span<const Attractor> attractors,
                    std::size_t per_point, const GravityConstants& k);
}  // namespace parallel

/// 1 - cos(a, b), clamped to [0, 2].
Matrix cosine_distances(std::span<const std::vector<double>> vectors, Backend backend = Backend::parallel);

std::vector<double> coc_raw_batch(std::span<const std::vector<double>> sentences, const ConceptSpec& spec,
                                  Backend backend = Backend::parallel);

Matrix squared_distances(std::span<const std::vector<double>> vectors, Backend backend = Backend::parallel);

/// Row-conditional Gaussian affinities p(j|i); each row's bandwidth is
/// bisected until its entropy matches log(perplexity).
Matrix conditional_affinities(const Matrix& squared_distances, double perplexity,
                              Backend backend = Backend::parallel);

/// Exact KL gradient 4 * sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)
/// for a 2-D map `y` stored row-major (n x 2).
void tsne_gradient(const Matrix& p, std::span<const double> y, std::span<double> grad,
                   Backend backend = Backend::parallel);

/// KL(P || Q) for a 2-D map; serial, used for diagnostics and tests.
double tsne_cost(const Matrix& p, std::span<const double> y);

/// One damped update of every point followed by the radial clamp to the
/// unit disk. `attractors` holds `per_point` entries per point. Returns the
/// largest position change.
double gravity_step(std::span<Vec2> positions, std::span<Vec2> velocities, std::span<const Attractor> attractors,
                    std::size_t per_point, const GravityConstants& k, Backend backend = Backend::parallel);

}  // namespace opra::kernels
