#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "dpsnn/types.hpp"

namespace dpsnn {

/// Per-endpoint tally of what this worker pushed to each peer.
struct TrafficCounters {
  std::vector<std::uint64_t> payload_bytes;      // indexed by target worker
  std::vector<std::uint64_t> payload_transfers;  // nonempty payloads sent
  std::uint64_t count_rounds = 0;
  std::uint64_t payload_rounds = 0;

  explicit TrafficCounters(std::uint32_t peers = 0)
      : payload_bytes(peers, 0), payload_transfers(peers, 0) {}
};

/// One worker's handle on the message-exchange layer. Collective calls must be
/// made by every worker in the same order. Endpoints are not shared between
/// workers.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual WorkerId rank() const noexcept = 0;
  virtual std::uint32_t size() const noexcept = 0;

  /// Dense single-word exchange: entry j of `my_counts` goes to worker j. The
  /// result is indexed by source worker.
  virtual std::vector<std::uint32_t> exchange_counts(std::span<const std::uint32_t> my_counts) = 0;

  /// Sparse exchange. `outgoing[j]` goes to worker j; only nonempty entries
  /// are transferred. `expected_bytes[s]` is the size announced by worker s
  /// for this round; a mismatch throws ProtocolError. The result is indexed by
  /// source worker.
  virtual std::vector<Bytes> exchange_payloads(std::vector<Bytes> outgoing,
                                               std::span<const std::uint64_t> expected_bytes) = 0;

  virtual void barrier() = 0;

  const TrafficCounters& traffic() const noexcept { return traffic_; }

 protected:
  explicit Endpoint(std::uint32_t peers) : traffic_(peers) {}
  TrafficCounters traffic_;
};

/// H = 1: everything is a local copy.
class LoopbackEndpoint final : public Endpoint {
 public:
  LoopbackEndpoint() : Endpoint(1) {}

  WorkerId rank() const noexcept override { return 0; }
  std::uint32_t size() const noexcept override { return 1; }
  std::vector<std::uint32_t> exchange_counts(std::span<const std::uint32_t> my_counts) override;
  std::vector<Bytes> exchange_payloads(std::vector<Bytes> outgoing,
                                       std::span<const std::uint64_t> expected_bytes) override;
  void barrier() override {}
};

/// Shared state for H workers running as threads of one process. Each
/// collective is one rendezvous; mailboxes are double-buffered by round
/// parity so a fast worker cannot overwrite data a slow peer is still reading.
class ThreadFabric {
 public:
  explicit ThreadFabric(std::uint32_t workers,
                        std::chrono::milliseconds timeout = std::chrono::seconds(120));
  ~ThreadFabric();

  ThreadFabric(const ThreadFabric&) = delete;
  ThreadFabric& operator=(const ThreadFabric&) = delete;

  std::uint32_t size() const noexcept { return workers_; }

  /// Endpoint for `rank`. Each rank may be claimed once.
  std::unique_ptr<Endpoint> endpoint(WorkerId rank);

  /// Wakes every blocked worker with a FabricError. Used when one worker
  /// fails so that its peers do not wait for the timeout.
  void abort();

 private:
  class ThreadEndpoint;
  friend class ThreadEndpoint;

  // Blocks until all workers arrived. Throws FabricError on timeout (naming
  // the absent ranks) or abort.
  void rendezvous(WorkerId rank);

  std::uint32_t workers_;
  std::chrono::milliseconds timeout_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  std::uint32_t arrived_ = 0;
  std::vector<bool> present_;
  std::vector<bool> claimed_;
  bool aborted_ = false;
  std::string abort_reason_;

  // [parity][source * H + target]
  std::vector<std::uint32_t> counts_[2];
  std::vector<Bytes> mailboxes_[2];
  std::vector<std::uint8_t> mailbox_full_[2];
};

}  // namespace dpsnn
