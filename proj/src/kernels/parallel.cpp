#include "opra/kernels.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace opra::kernels::parallel {

namespace {

std::ptrdiff_t signed_size(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

}  // namespace

Matrix cosine_distances(std::span<const std::vector<double>> vectors) {
    const std::size_t n = vectors.size();
    std::vector<double> norms(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < signed_size(n); ++i) {
        double s = 0.0;
        for (double v : vectors[i]) s += v * v;
        norms[i] = std::sqrt(s);
    }
    Matrix out(n, n, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < signed_size(n); ++i) {
        const auto& a = vectors[i];
        for (std::size_t j = 0; j < n; ++j) {
            const auto& b = vectors[j];
            double dot = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) dot += a[d] * b[d];
            const double denom = norms[i] * norms[j];
            const double cos = denom > 0.0 ? dot / denom : 0.0;
            out(i, j) = std::clamp(1.0 - cos, 0.0, 2.0);
        }
    }
    return out;
}

std::vector<double> coc_raw_batch(std::span<const std::vector<double>> sentences, const ConceptSpec& spec) {
    // coc_raw throws on bad input; exceptions must not leave an OpenMP region
    if (!sentences.empty()) {
        for (const auto& s : sentences)
            if (s.size() != sentences.front().size()) throw Error("sentence embeddings differ in dimension");
        (void)coc_raw(sentences.front(), spec);
    }
    std::vector<double> out(sentences.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < signed_size(sentences.size()); ++i) out[i] = coc_raw(sentences[i], spec);
    return out;
}

Matrix squared_distances(std::span<const std::vector<double>> vectors) {
    const std::size_t n = vectors.size();
    Matrix out(n, n, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < signed_size(n); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < vectors[i].size(); ++d) {
                const double diff = vectors[i][d] - vectors[j][d];
                s += diff * diff;
            }
            out(i, j) = s;
        }
    }
    return out;
}

Matrix conditional_affinities(const Matrix& dist, double perplexity) {
    const std::size_t n = dist.rows();
    Matrix p(n, n, 0.0);
    const double target = std::log(perplexity);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t si = 0; si < signed_size(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        auto row = p.row(i);
        const auto d = dist.row(i);
        double beta = 1.0;
        double lo = -DBL_MAX;
        double hi = DBL_MAX;
        for (int iter = 0; iter < 200; ++iter) {
            double sum = DBL_MIN;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] = j == i ? 0.0 : std::exp(-beta * d[j]);
                sum += row[j];
            }
            double entropy = 0.0;
            for (std::size_t j = 0; j < n; ++j) entropy += beta * d[j] * row[j];
            entropy = entropy / sum + std::log(sum);
            for (std::size_t j = 0; j < n; ++j) row[j] /= sum;

            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = hi == DBL_MAX ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = lo == -DBL_MAX ? beta / 2.0 : (beta + lo) / 2.0;
            }
        }
    }
    return p;
}

void tsne_gradient(const Matrix& p, std::span<const double> y, std::span<double> grad) {
    const std::size_t n = p.rows();
    Matrix num(n, n, 0.0);
    std::vector<double> row_sums(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < signed_size(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
            s += num(i, j);
        }
        row_sums[i] = s;
    }
    // Fixed-order reduction keeps the result independent of the thread count.
    double sum_q = 0.0;
    for (double s : row_sums) sum_q += s;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < signed_size(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        double gx = 0.0;
        double gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double mult = 4.0 * (p(i, j) - num(i, j) / sum_q) * num(i, j);
            gx += mult * (y[2 * i] - y[2 * j]);
            gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = gx;
        grad[2 * i + 1] = gy;
    }
}

double gravity_step(std::span<Vec2> positions, std::span<Vec2> velocities, std::span<const Attractor> attractors,
                    std::size_t per_point, const GravityConstants& k) {
    // Each point reads only its own previous position, so updating in place is safe.
    double max_change = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_change)
    for (std::ptrdiff_t si = 0; si < signed_size(positions.size()); ++si) {
        const auto i = static_cast<std::size_t>(si);
        const Vec2 previous = positions[i];
        Vec2 total;
        for (std::size_t j = 0; j < per_point; ++j) {
            const Attractor& a = attractors[i * per_point + j];
            if (a.mass == 0.0) continue;
            total += gravity_force(previous, a, k).vector;
        }
        velocities[i] = velocities[i] * k.gamma + total * k.delta;
        Vec2 next = previous + velocities[i];
        const double r = next.norm();
        if (r > 1.0) next = next * (1.0 / r);
        max_change = std::max(max_change, (next - previous).norm());
        positions[i] = next;
    }
    return max_change;
}

}  // namespace opra::kernels::parallel
