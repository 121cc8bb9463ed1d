#ifndef OATK_RNG_HPP
#define OATK_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace oatk {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Derives an independent stream id from a root seed and a path of indices.
// Streams are stable across runs and independent of evaluation schedule,
// so (seed, replicate, column) always maps to the same draws.
inline std::uint64_t substream(std::uint64_t seed,
                               std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = detail::splitmix64(seed ^ 0x8f1bbcdcbfa53e0bULL);
    for (std::uint64_t id : path) {
        h = detail::splitmix64(h ^ detail::splitmix64(id + 0x2545f4914f6cdd1dULL));
    }
    return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path = {}) {
    return std::mt19937_64(substream(seed, path));
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& eng, Eigen::Index n) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = normal(eng);
    }
    return v;
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& eng, Eigen::Index rows,
                                       Eigen::Index cols) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = normal(eng);
        }
    }
    return m;
}

// First `m` coordinates of a uniformly distributed unit vector in R^dim.
// Same law as normalizing a standard normal in R^dim, but costs O(m) by
// folding the remaining dim-m coordinates into one chi-square draw.
inline Eigen::VectorXd sphere_coords(std::mt19937_64& eng, Eigen::Index m,
                                     Eigen::Index dim) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd head(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        head[i] = normal(eng);
    }
    double tail_sq = 0.0;
    if (dim > m) {
        std::gamma_distribution<double> chisq(0.5 * static_cast<double>(dim - m), 2.0);
        tail_sq = chisq(eng);
    }
    const double norm = std::sqrt(head.squaredNorm() + tail_sq);
    if (norm == 0.0) {
        head.setZero();
        head[0] = 1.0;
        return head;
    }
    return head / norm;
}

} // namespace oatk

#endif
