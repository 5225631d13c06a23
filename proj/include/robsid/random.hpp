#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace robsid {

/// Seeded random stream. Streams for independent Monte Carlo realizations
/// are derived from (seed, run, attempt, purpose) so that results do not
/// depend on scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::uint64_t run, std::uint64_t attempt = 0,
                      std::uint64_t purpose = 0);

    double normal();
    double uniform();
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);
    /// Draw from the chi distribution with `dof` degrees of freedom.
    double chi(double dof);

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace robsid
