#include "ucbqr/estimators.hpp"

#include <cmath>
#include <limits>

namespace ucbqr {

UcbState::UcbState(std::size_t num_lines)
    : pulls(num_lines, 0),
      successes(num_lines, 0),
      ucb(num_lines, std::numeric_limits<double>::infinity()) {}

double UcbState::empirical_mean(std::size_t line) const {
    if (pulls[line] == 0) return 0.0;
    return static_cast<double>(successes[line]) / static_cast<double>(pulls[line]);
}

void ucb_update(UcbState& state, int episode, const std::vector<std::vector<int>>& samples) {
    if (episode < 1) throw std::invalid_argument("episode index starts at 1");
    if (samples.size() != state.size()) throw std::invalid_argument("one sample list per line");
    const double log_k = std::log(static_cast<double>(episode));
    for (std::size_t l = 0; l < state.size(); ++l) {
        for (int y : samples[l]) {
            if (y != 0 && y != 1) throw std::invalid_argument("payoff samples must be 0 or 1");
            state.successes[l] += y;
        }
        state.pulls[l] += static_cast<std::int64_t>(samples[l].size());
        if (state.pulls[l] == 0) {
            state.ucb[l] = std::numeric_limits<double>::infinity();
        } else {
            state.ucb[l] = state.empirical_mean(l) +
                           std::sqrt(log_k / static_cast<double>(state.pulls[l]));
        }
    }
}

double holt_update_and_forecast(HoltState& state, double observed, double alpha, double beta) {
    const double prev_level = state.level;
    const double prev_forecast = state.level + state.trend;
    state.level = alpha * observed + (1.0 - alpha) * prev_forecast;
    state.trend = beta * (state.level - prev_level) + (1.0 - beta) * state.trend;
    state.last_forecast = state.level + state.trend;
    ++state.episode;
    return state.last_forecast;
}

double forecast_to_rate(double forecast, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("episode length must be positive");
    return std::max(forecast / h, 0.0);
}

ServiceRateState::ServiceRateState(std::size_t num_lines, double mu_init)
    : count(num_lines, 0), total_duration(num_lines, 0.0), estimate(num_lines, mu_init),
      mu_init(mu_init) {}

void service_rate_update(ServiceRateState& state, const std::vector<std::vector<double>>& completed) {
    if (completed.size() != state.count.size())
        throw std::invalid_argument("one duration list per line");
    for (std::size_t l = 0; l < completed.size(); ++l) {
        for (double d : completed[l]) {
            if (!(d > 0.0)) throw std::invalid_argument("service durations must be positive");
            state.total_duration[l] += d;
        }
        state.count[l] += static_cast<std::int64_t>(completed[l].size());
        state.estimate[l] = state.count[l] > 0
                                ? static_cast<double>(state.count[l]) / state.total_duration[l]
                                : state.mu_init;
    }
}

double mase(std::span<const double> forecasts, std::span<const double> actuals) {
    if (forecasts.size() != actuals.size()) throw std::invalid_argument("series lengths differ");
    const std::size_t n = actuals.size();
    if (n < 2) throw std::invalid_argument("MASE needs at least two observations");
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) err += std::abs(forecasts[k] - actuals[k]);
    double naive = 0.0;
    for (std::size_t k = 1; k < n; ++k) naive += std::abs(actuals[k] - actuals[k - 1]);
    if (naive == 0.0) throw DegenerateSeries("actuals are constant; naive error is zero");
    return (err / static_cast<double>(n)) / (naive / static_cast<double>(n - 1));
}

}  // namespace ucbqr
