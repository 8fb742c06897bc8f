#include "dpsnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpsnn {

void IzhikevichParams::validate() const {
  if (!(v_peak > c)) throw ConfigError("v_peak", "must exceed the reset potential c");
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d))
    throw ConfigError("izhikevich", "parameters must be finite");
}

void StdpParams::validate() const {
  if (!(a_plus > 0)) throw ConfigError("stdp.a_plus", "must be > 0");
  if (!(a_minus < 0)) throw ConfigError("stdp.a_minus", "must be < 0");
  if (!(tau_plus > 0)) throw ConfigError("stdp.tau_plus", "must be > 0");
  if (!(tau_minus > 0)) throw ConfigError("stdp.tau_minus", "must be > 0");
  if (!(w_min <= w_max)) throw ConfigError("stdp.w_min", "must not exceed stdp.w_max");
  if (consolidation_period <= 0) throw ConfigError("stdp.consolidation_period", "must be > 0");
}

NeuronState membrane_substep(const NeuronState& state, const IzhikevichParams& params,
                             double input, double dt) {
  if (!std::isfinite(state.v) || !std::isfinite(state.u) || !std::isfinite(input)) {
    throw NumericDivergence("non-finite membrane input (v=" + std::to_string(state.v) +
                            ", u=" + std::to_string(state.u) + ", I=" + std::to_string(input) + ")");
  }
  const double v = state.v;
  const double u = state.u;
  NeuronState next = state;
  next.v = v + dt * (0.04 * v * v + 5.0 * v + 140.0 - u + input);
  next.u = u + dt * params.a * (params.b * v - u);
  if (!std::isfinite(next.v) || !std::isfinite(next.u)) {
    throw NumericDivergence("membrane state diverged (v=" + std::to_string(v) +
                            ", u=" + std::to_string(u) + ", I=" + std::to_string(input) + ")");
  }
  return next;
}

FireResult fire_and_reset(const NeuronState& state, const IzhikevichParams& params,
                          TimeMs t_now) {
  if (state.v < params.v_peak) return {state, false};
  return {NeuronState{params.c, state.u + params.d, t_now}, true};
}

double stdp_delta(double t_post, double t_pre, double axon_delay, const StdpParams& params) {
  const double lag = t_post - t_pre - axon_delay;
  if (lag >= 0) return params.a_plus * std::exp(-lag / params.tau_plus);
  return params.a_minus * std::exp(lag / params.tau_minus);
}

double consolidate_weight(double weight, double accumulated_delta, const StdpParams& params) {
  return std::clamp(weight + accumulated_delta, params.w_min, params.w_max);
}

}  // namespace dpsnn
