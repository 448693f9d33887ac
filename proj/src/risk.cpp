#include "riskalloc/risk.hpp"

#include "riskalloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace riskalloc {

void ImpactSampleSet::validate() const {
    if (values.empty()) throw ConfigError("risk: empty sample set");
    for (double v : values)
        if (!std::isfinite(v) || v < 0.0)
            throw ConfigError("risk: impact values must be finite and nonnegative");
}

RiskMeasure risk_measure_from_string(const std::string& s) {
    if (s == "cvar") return RiskMeasure::cvar;
    if (s == "var") return RiskMeasure::var;
    if (s == "worst_case") return RiskMeasure::worst_case;
    if (s == "mean") return RiskMeasure::mean;
    if (s == "nominal") return RiskMeasure::nominal;
    throw ConfigError("risk: unknown measure '" + s + "'");
}

const char* to_string(RiskMeasure m) {
    switch (m) {
        case RiskMeasure::cvar: return "cvar";
        case RiskMeasure::var: return "var";
        case RiskMeasure::worst_case: return "worst_case";
        case RiskMeasure::mean: return "mean";
        case RiskMeasure::nominal: return "nominal";
    }
    return "unknown";
}

void RiskConfig::validate() const {
    if ((measure == RiskMeasure::cvar || measure == RiskMeasure::var) &&
        !(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("risk: alpha must lie strictly inside (0,1)");
}

CvarResult cvar(const ImpactSampleSet& samples, double alpha) {
    samples.validate();
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("risk: alpha must lie strictly inside (0,1)");
    const auto& q = samples.values;
    const std::size_t N = q.size();
    const double h = (1.0 - alpha) * static_cast<double>(N);

    // The RU objective is convex piecewise linear in v with breakpoints at
    // the sample values; evaluate it at every breakpoint via suffix sums of
    // the descending order statistics.
    std::vector<double> sorted(q);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());

    double best = std::numeric_limits<double>::infinity();
    double best_v = sorted.front();
    double above = 0.0;  // sum of (q_i - v) for q_i > v, accumulated on the fly
    for (std::size_t k = 0; k < N; ++k) {
        const double v = sorted[k];
        if (k > 0) above += static_cast<double>(k) * (sorted[k - 1] - v);
        const double obj = v + above / h;
        if (obj < best) {
            best = obj;
            best_v = v;
        }
    }
    return {best, best_v};
}

double var(const ImpactSampleSet& samples, double alpha) {
    samples.validate();
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("risk: alpha must lie strictly inside (0,1)");
    std::vector<double> sorted(samples.values);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const double h = (1.0 - alpha) * static_cast<double>(sorted.size());
    if (h <= 1.0) return sorted.front();
    const auto k = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(k);
    if (frac == 0.0 || k >= sorted.size()) return sorted[k - 1];
    return sorted[k - 1] + frac * (sorted[k] - sorted[k - 1]);
}

double worst_case(const ImpactSampleSet& samples) {
    samples.validate();
    return *std::max_element(samples.values.begin(), samples.values.end());
}

double mean(const ImpactSampleSet& samples) {
    samples.validate();
    return std::accumulate(samples.values.begin(), samples.values.end(), 0.0) /
           static_cast<double>(samples.values.size());
}

double risk_value(const RiskConfig& config, const ImpactSampleSet& samples) {
    config.validate();
    switch (config.measure) {
        case RiskMeasure::cvar: return cvar(samples, config.alpha).value;
        case RiskMeasure::var: return var(samples, config.alpha);
        case RiskMeasure::worst_case: return worst_case(samples);
        case RiskMeasure::mean: return mean(samples);
        case RiskMeasure::nominal:
            if (!samples.nominal_value)
                throw ConfigError("risk: nominal measure requested without a nominal value");
            return *samples.nominal_value;
    }
    throw ConfigError("risk: unknown measure");
}

}  // namespace riskalloc
