#pragma once

#include "dpsnn/types.hpp"

namespace dpsnn {

struct IzhikevichParams {
  double a = 0.02;
  double b = 0.2;
  double c = -65.0;
  double d = 8.0;
  double v_peak = 30.0;

  // Excitatory regular-spiking cell.
  static constexpr IzhikevichParams regular_spiking() { return {0.02, 0.2, -65.0, 8.0, 30.0}; }
  // Inhibitory fast-spiking cell.
  static constexpr IzhikevichParams fast_spiking() { return {0.1, 0.2, -65.0, 2.0, 30.0}; }

  void validate() const;
};

struct NeuronState {
  double v = -65.0;
  double u = -13.0;
  TimeMs last_spike_time = kNever;

  bool operator==(const NeuronState&) const = default;
};

struct StdpParams {
  double a_plus = 0.1;
  double a_minus = -0.12;
  double tau_plus = 20.0;
  double tau_minus = 20.0;
  double w_min = 0.0;
  double w_max = 10.0;
  TimeMs consolidation_period = 1000;

  void validate() const;
};

/// One explicit-Euler step of the below-threshold dynamics:
///   v' = v + dt (0.04 v^2 + 5 v + 140 - u + I)
///   u' = u + dt a (b v - u)
/// No reset is applied. Throws NumericDivergence if the input or the result
/// is not finite.
NeuronState membrane_substep(const NeuronState& state, const IzhikevichParams& params,
                             double input, double dt);

struct FireResult {
  NeuronState state;
  bool fired = false;
};

/// Applies the spike reset (v <- c, u <- u + d) when v has reached v_peak.
FireResult fire_and_reset(const NeuronState& state, const IzhikevichParams& params,
                          TimeMs t_now);

/// Weight change for a pre spike emitted at t_pre arriving after axon_delay,
/// paired with a post spike at t_post. Positive lag potentiates, negative
/// lag depresses.
double stdp_delta(double t_post, double t_pre, double axon_delay, const StdpParams& params);

double consolidate_weight(double weight, double accumulated_delta, const StdpParams& params);

}  // namespace dpsnn
