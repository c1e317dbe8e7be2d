#include "opra/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace opra::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

Force gravity_force(Vec2 position, const Attractor& attractor, const GravityConstants& k) {
    const Vec2 to_target = attractor.target - position;
    const double r = to_target.norm();
    const double gap = r + k.eps1;
    Force f;
    f.magnitude = k.g * attractor.mass / (gap * gap);
    f.vector = to_target * (f.magnitude / std::max(r, k.eps2));
    return f;
}

Matrix cosine_distances(std::span<const std::vector<double>> vectors, Backend backend) {
    return backend == Backend::serial ? serial::cosine_distances(vectors) : parallel::cosine_distances(vectors);
}

std::vector<double> coc_raw_batch(std::span<const std::vector<double>> sentences, const ConceptSpec& spec,
                                  Backend backend) {
    return backend == Backend::serial ? serial::coc_raw_batch(sentences, spec)
                                      : parallel::coc_raw_batch(sentences, spec);
}

Matrix squared_distances(std::span<const std::vector<double>> vectors, Backend backend) {
    return backend == Backend::serial ? serial::squared_distances(vectors) : parallel::squared_distances(vectors);
}

Matrix conditional_affinities(const Matrix& squared_distances, double perplexity, Backend backend) {
    return backend == Backend::serial ? serial::conditional_affinities(squared_distances, perplexity)
                                      : parallel::conditional_affinities(squared_distances, perplexity);
}

void tsne_gradient(const Matrix& p, std::span<const double> y, std::span<double> grad, Backend backend) {
    if (backend == Backend::serial)
        serial::tsne_gradient(p, y, grad);
    else
        parallel::tsne_gradient(p, y, grad);
}

double tsne_cost(const Matrix& p, std::span<const double> y) {
    const std::size_t n = p.rows();
    double sum_q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            sum_q += 1.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            const double q = 1.0 / (1.0 + dx * dx + dy * dy) / sum_q;
            kl += p(i, j) * std::log(p(i, j) / q);
        }
    }
    return kl;
}

double gravity_step(std::span<Vec2> positions, std::span<Vec2> velocities, std::span<const Attractor> attractors,
                    std::size_t per_point, const GravityConstants& k, Backend backend) {
    return backend == Backend::serial ? serial::gravity_step(positions, velocities, attractors, per_point, k)
                                      : parallel::gravity_step(positions, velocities, attractors, per_point, k);
}

}  // namespace opra::kernels
