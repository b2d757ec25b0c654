#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ucbqr {

/// Per-line payoff statistics. Successes are kept as an integer so the
/// empirical mean is an exact ratio.
struct UcbState {
    std::vector<std::int64_t> pulls;
    std::vector<std::int64_t> successes;
    std::vector<double> ucb;  // +inf while a line is unexplored

    explicit UcbState(std::size_t num_lines = 0);

    double empirical_mean(std::size_t line) const;
    std::size_t size() const { return pulls.size(); }
};

/// Folds in the Bernoulli outcomes observed on each line and recomputes the
/// upper confidence bounds with ln(episode). samples.size() must equal the
/// number of lines.
void ucb_update(UcbState& state, int episode, const std::vector<std::vector<int>>& samples);

struct HoltState {
    double level = 0.0;
    double trend = 0.0;
    double last_forecast = 0.0;
    int episode = 0;
};

/// One step of Holt's linear trend method; returns the forecast for the
/// next period. May be negative.
double holt_update_and_forecast(HoltState& state, double observed, double alpha, double beta);

/// Converts a per-episode count forecast into a rate.
double forecast_to_rate(double forecast, double h);

/// Per-line running service statistics.
struct ServiceRateState {
    std::vector<std::int64_t> count;
    std::vector<double> total_duration;
    std::vector<double> estimate;
    double mu_init = 1e-3;

    ServiceRateState() = default;
    ServiceRateState(std::size_t num_lines, double mu_init);
};

void service_rate_update(ServiceRateState& state, const std::vector<std::vector<double>>& completed);

class DegenerateSeries : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Mean absolute scaled error against the one-step naive forecast.
double mase(std::span<const double> forecasts, std::span<const double> actuals);

}  // namespace ucbqr
