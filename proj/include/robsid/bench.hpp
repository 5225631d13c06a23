#pragma once

// Monte Carlo risk benchmark over randomly sampled systems.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "robsid/bayes.hpp"
#include "robsid/lti.hpp"
#include "robsid/sid.hpp"

namespace robsid {

enum class Method { heuristic, midpoint, hard, soft, optimal, sure, bayes };

std::string to_string(Method method);
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

/// One sampled system with its simulated data and ground truth.
struct Realization {
    SampledSystem system;
    Matrix u;  ///< n_i x T, T = N + 2 i - 1
    Matrix y;  ///< n_o x T
    Index horizon = 0;
    TrueDecomposition truth;
};

/// Deterministic in (spec, seed, run_id, attempt). `noiseless` zeroes the
/// simulation noise while keeping the sampled model.
Realization make_realization(const SystemSpec& spec, std::uint64_t seed, Index run_id,
                             Index attempt, bool noiseless = false);

struct PipelineResult {
    LsEstimate ls;
    RankSelection rank;
    Vector singular_values;  ///< of W1 H_fp_hat W2 under the final weights
    Index order_neff = 0;  ///< 0 when not requested and fewer than 3 values
    Index order_midpoint = 0;
    Index gibbs_rank = 0;
    bool gibbs_rank_warning = false;
    std::map<Method, Matrix> estimates;
};

/// LS -> rank_star (sigma, G_f) -> each requested estimator.
PipelineResult run_pipeline(const HankelData& data, WeightScheme scheme,
                            std::span<const Method> methods, const GibbsConfig& gibbs,
                            Rng& gibbs_rng);

/// ||W1 (h_true - h_est) W2||_F^2.
double realization_risk(const Matrix& h_true, const Matrix& h_est, const WeightPair& weights);

struct RiskAggregate {
    double normalized = 1.0;  ///< exp(mean ln(risk / reference))
    double se_factor = 1.0;   ///< exp(sd / sqrt(n)) of the log ratios
    Index used = 0;
    Index excluded = 0;       ///< non-positive or non-finite pairs
};

RiskAggregate aggregate_risk(std::span<const double> risks, std::span<const double> references);

struct BenchConfig {
    Index runs = 300;
    WeightScheme scheme = WeightScheme::identity;
    std::vector<Method> methods = all_methods();
    GibbsConfig gibbs;
    std::uint64_t seed = 0;
    unsigned parallelism = 1;
    SystemSpec system;
    int max_attempts = 20;
};

struct RunRecord {
    Index run_id = 0;
    Index n_x = 0;
    double snr = 0.0;
    Method method = Method::heuristic;
    double risk = 0.0;
    double risk_ref = 0.0;
};

struct MethodSummary {
    Method method = Method::heuristic;
    RiskAggregate aggregate;
};

struct RiskReport {
    WeightScheme scheme = WeightScheme::identity;
    std::vector<RunRecord> per_run;
    std::vector<MethodSummary> summary;
    Index failures = 0;  ///< realizations resampled after a numerical failure
    double wall_seconds = 0.0;

    const MethodSummary& find(Method method) const;
};

/// Runs are independent; per-run streams derive from (seed, run id,
/// attempt) only, so the report does not depend on `parallelism`.
RiskReport run_benchmark(const BenchConfig& config);

void write_per_run_csv(std::ostream& os, const RiskReport& report);

}  // namespace robsid
