// Straight-line reference versions of the hot loops. The OpenMP kernels are
// tested against these.

#include "opra/kernels.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace opra::kernels::serial {

Matrix cosine_distances(std::span<const std::vector<double>> vectors) {
    const std::size_t n = vectors.size();
    Matrix out(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            double na = 0.0;
            double nb = 0.0;
            for (std::size_t d = 0; d < vectors[i].size(); ++d) {
                dot += vectors[i][d] * vectors[j][d];
                na += vectors[i][d] * vectors[i][d];
                nb += vectors[j][d] * vectors[j][d];
            }
            const double denom = std::sqrt(na) * std::sqrt(nb);
            const double cos = denom > 0.0 ? dot / denom : 0.0;
            out(i, j) = std::clamp(1.0 - cos, 0.0, 2.0);
        }
    }
    return out;
}

std::vector<double> coc_raw_batch(std::span<const std::vector<double>> sentences, const ConceptSpec& spec) {
    std::vector<double> out;
    out.reserve(sentences.size());
    for (const auto& h : sentences) out.push_back(coc_raw(h, spec));
    return out;
}

Matrix squared_distances(std::span<const std::vector<double>> vectors) {
    const std::size_t n = vectors.size();
    Matrix out(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
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
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0;
        double lo = -DBL_MAX;
        double hi = DBL_MAX;
        for (int iter = 0; iter < 200; ++iter) {
            double sum = DBL_MIN;
            for (std::size_t j = 0; j < n; ++j) {
                p(i, j) = j == i ? 0.0 : std::exp(-beta * dist(i, j));
                sum += p(i, j);
            }
            double entropy = 0.0;
            for (std::size_t j = 0; j < n; ++j) entropy += beta * dist(i, j) * p(i, j);
            entropy = entropy / sum + std::log(sum);
            for (std::size_t j = 0; j < n; ++j) p(i, j) /= sum;

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
    double sum_q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
            row += num(i, j);
        }
        sum_q += row;
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double mult = 4.0 * (p(i, j) - num(i, j) / sum_q) * num(i, j);
            grad[2 * i] += mult * (y[2 * i] - y[2 * j]);
            grad[2 * i + 1] += mult * (y[2 * i + 1] - y[2 * j + 1]);
        }
    }
}

double gravity_step(std::span<Vec2> positions, std::span<Vec2> velocities, std::span<const Attractor> attractors,
                    std::size_t per_point, const GravityConstants& k) {
    const std::vector<Vec2> previous(positions.begin(), positions.end());
    double max_change = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        Vec2 total;
        for (std::size_t j = 0; j < per_point; ++j) {
            const Attractor& a = attractors[i * per_point + j];
            if (a.mass == 0.0) continue;
            total += gravity_force(previous[i], a, k).vector;
        }
        velocities[i] = velocities[i] * k.gamma + total * k.delta;
        Vec2 next = previous[i] + velocities[i];
        const double r = next.norm();
        if (r > 1.0) next = next * (1.0 / r);
        max_change = std::max(max_change, (next - previous[i]).norm());
        positions[i] = next;
    }
    return max_change;
}

}  // namespace opra::kernels::serial
