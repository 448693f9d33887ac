#pragma once

#include <optional>
#include <string>
#include <vector>

// Risk functionals over per-sample impact values: empirical CVaR (exact
// Rockafellar-Uryasev minimization), VaR, worst case, mean, and the nominal
// measure.

namespace riskalloc {

struct ImpactSampleSet {
    std::vector<double> values;
    std::vector<int> sample_ids;
    // Impact of the nominal (delta = 0) system, when the caller computed it.
    std::optional<double> nominal_value;

    void validate() const;  // finite, nonnegative, nonempty
};

enum class RiskMeasure { cvar, var, worst_case, mean, nominal };

RiskMeasure risk_measure_from_string(const std::string& s);
const char* to_string(RiskMeasure m);

struct RiskConfig {
    RiskMeasure measure = RiskMeasure::cvar;
    double alpha = 0.8;  // tail mass 1 - alpha, alpha in (0,1)

    void validate() const;
};

struct CvarResult {
    double value = 0.0;
    double minimizer = 0.0;  // the v attaining the RU minimum
};

// Exact minimization of the Rockafellar-Uryasev objective
//   v + (1/((1-alpha) N)) sum_i (q_i - v)^+
// over the piecewise-linear breakpoints.
CvarResult cvar(const ImpactSampleSet& samples, double alpha);

// Empirical (1-alpha)-upper quantile with linear interpolation between
// order statistics; var <= cvar under this convention.
double var(const ImpactSampleSet& samples, double alpha);

double worst_case(const ImpactSampleSet& samples);
double mean(const ImpactSampleSet& samples);

// Dispatch on the configured measure (nominal requires nominal_value).
double risk_value(const RiskConfig& config, const ImpactSampleSet& samples);

}  // namespace riskalloc
