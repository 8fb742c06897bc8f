#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <string_view>

namespace dpsnn {

// Functional blocks of one simulated millisecond, in loop order.
enum class Block : std::size_t {
  kLtpPostSpike = 0,
  kBarrier,
  kSpikeCountExchange,
  kSpikePayloadExchange,
  kIntraProcessMulticast,
  kCurrentInjectionLtd,
  kThalamicInput,
  kNeuralDynamics,
  kStatistics,
  kLongTermPlasticity,
};

inline constexpr std::size_t kBlockCount = 10;

inline constexpr std::array<std::string_view, kBlockCount> kBlockNames = {
    "Long term potentiation + after spike dynamic",
    "Barrier (optional)",
    "Communication: inter-process multicast: Spikes dim",
    "Communication: inter-process multicast: Spikes payload",
    "Axonal to synaptic spikes: intra-process multicast",
    "Add synaptic currents + long term depression",
    "Thalamic input",
    "Ordinary neural dynamic",
    "Rastergram & other statistical functions",
    "Long term synaptic plasticity",
};

constexpr std::string_view block_name(Block b) { return kBlockNames[static_cast<std::size_t>(b)]; }

struct BlockTimerReport {
  std::array<double, kBlockCount> seconds{};
  double total_seconds = 0.0;  // wall time of the timed loop
  bool barrier_enabled = false;

  double tracked_seconds() const noexcept {
    double sum = 0.0;
    for (double s : seconds) sum += s;
    return sum;
  }
  double residue_seconds() const noexcept { return total_seconds - tracked_seconds(); }
  double& operator[](Block b) noexcept { return seconds[static_cast<std::size_t>(b)]; }
  double operator[](Block b) const noexcept { return seconds[static_cast<std::size_t>(b)]; }
};

/// Lap timer: each lap() charges the time since the previous lap to one block,
/// so consecutive blocks tile the loop with no gaps.
class BlockClock {
 public:
  using clock = std::chrono::steady_clock;

  explicit BlockClock(BlockTimerReport& report) : report_(report) {}

  void set_enabled(bool on) noexcept { enabled_ = on; }
  bool enabled() const noexcept { return enabled_; }

  void start() noexcept {
    if (enabled_) last_ = clock::now();
  }

  void lap(Block b) noexcept {
    if (!enabled_) return;
    const auto now = clock::now();
    report_[b] += std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  BlockTimerReport& report_;
  clock::time_point last_{};
  bool enabled_ = false;
};

}  // namespace dpsnn
