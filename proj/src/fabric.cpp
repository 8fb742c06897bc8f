#include "dpsnn/fabric.hpp"

#include <string>

namespace dpsnn {

std::vector<std::uint32_t> LoopbackEndpoint::exchange_counts(std::span<const std::uint32_t> my_counts) {
  if (my_counts.size() != 1) throw FabricError("exchange_counts: expected 1 entry");
  ++traffic_.count_rounds;
  return {my_counts.begin(), my_counts.end()};
}

std::vector<Bytes> LoopbackEndpoint::exchange_payloads(std::vector<Bytes> outgoing,
                                                       std::span<const std::uint64_t> expected_bytes) {
  if (outgoing.size() != 1 || expected_bytes.size() != 1)
    throw FabricError("exchange_payloads: expected 1 entry");
  if (outgoing[0].size() != expected_bytes[0])
    throw ProtocolError("worker 0 announced " + std::to_string(expected_bytes[0]) +
                        " bytes but delivered " + std::to_string(outgoing[0].size()));
  ++traffic_.payload_rounds;
  if (!outgoing[0].empty()) {
    traffic_.payload_bytes[0] += outgoing[0].size();
    ++traffic_.payload_transfers[0];
  }
  return outgoing;
}

class ThreadFabric::ThreadEndpoint final : public Endpoint {
 public:
  ThreadEndpoint(ThreadFabric& fabric, WorkerId rank)
      : Endpoint(fabric.workers_), fabric_(fabric), rank_(rank) {}

  WorkerId rank() const noexcept override { return rank_; }
  std::uint32_t size() const noexcept override { return fabric_.workers_; }

  std::vector<std::uint32_t> exchange_counts(std::span<const std::uint32_t> my_counts) override {
    const std::uint32_t h = fabric_.workers_;
    if (my_counts.size() != h)
      throw FabricError("exchange_counts: expected " + std::to_string(h) + " entries");
    auto& buf = fabric_.counts_[count_parity_];
    count_parity_ ^= 1;
    for (std::uint32_t t = 0; t < h; ++t) buf[rank_ * h + t] = my_counts[t];
    fabric_.rendezvous(rank_);
    std::vector<std::uint32_t> received(h);
    for (std::uint32_t s = 0; s < h; ++s) received[s] = buf[s * h + rank_];
    ++traffic_.count_rounds;
    return received;
  }

  std::vector<Bytes> exchange_payloads(std::vector<Bytes> outgoing,
                                       std::span<const std::uint64_t> expected_bytes) override {
    const std::uint32_t h = fabric_.workers_;
    if (outgoing.size() != h || expected_bytes.size() != h)
      throw FabricError("exchange_payloads: expected " + std::to_string(h) + " entries");
    const int parity = payload_parity_;
    payload_parity_ ^= 1;
    auto& boxes = fabric_.mailboxes_[parity];
    auto& full = fabric_.mailbox_full_[parity];

    std::vector<Bytes> received(h);
    // Self-addressed data never touches the mailboxes.
    Bytes self = std::move(outgoing[rank_]);
    for (std::uint32_t t = 0; t < h; ++t) {
      if (t == rank_ || outgoing[t].empty()) continue;
      traffic_.payload_bytes[t] += outgoing[t].size();
      ++traffic_.payload_transfers[t];
      boxes[rank_ * h + t] = std::move(outgoing[t]);
      full[rank_ * h + t] = 1;
    }
    if (!self.empty()) {
      traffic_.payload_bytes[rank_] += self.size();
      ++traffic_.payload_transfers[rank_];
    }
    fabric_.rendezvous(rank_);
    ++traffic_.payload_rounds;

    for (std::uint32_t s = 0; s < h; ++s) {
      Bytes data;
      if (s == rank_) {
        data = std::move(self);
      } else if (full[s * h + rank_]) {
        data = std::move(boxes[s * h + rank_]);
        boxes[s * h + rank_] = Bytes{};
        full[s * h + rank_] = 0;
      }
      if (data.size() != expected_bytes[s])
        throw ProtocolError("worker " + std::to_string(s) + " announced " +
                            std::to_string(expected_bytes[s]) + " bytes to worker " +
                            std::to_string(rank_) + " but delivered " + std::to_string(data.size()));
      received[s] = std::move(data);
    }
    return received;
  }

  void barrier() override { fabric_.rendezvous(rank_); }

 private:
  ThreadFabric& fabric_;
  WorkerId rank_;
  int count_parity_ = 0;
  int payload_parity_ = 0;
};

ThreadFabric::ThreadFabric(std::uint32_t workers, std::chrono::milliseconds timeout)
    : workers_(workers), timeout_(timeout), present_(workers, false), claimed_(workers, false) {
  if (workers == 0) throw FabricError("fabric needs at least one worker");
  for (int p = 0; p < 2; ++p) {
    counts_[p].assign(static_cast<std::size_t>(workers) * workers, 0);
    mailboxes_[p].resize(static_cast<std::size_t>(workers) * workers);
    mailbox_full_[p].assign(static_cast<std::size_t>(workers) * workers, 0);
  }
}

ThreadFabric::~ThreadFabric() = default;

std::unique_ptr<Endpoint> ThreadFabric::endpoint(WorkerId rank) {
  std::lock_guard lock(mutex_);
  if (rank >= workers_) throw FabricError("rank " + std::to_string(rank) + " out of range");
  if (claimed_[rank]) throw FabricError("rank " + std::to_string(rank) + " already claimed");
  claimed_[rank] = true;
  return std::make_unique<ThreadEndpoint>(*this, rank);
}

void ThreadFabric::abort() {
  std::lock_guard lock(mutex_);
  if (!aborted_) abort_reason_ = "fabric aborted by a failing peer";
  aborted_ = true;
  cv_.notify_all();
}

void ThreadFabric::rendezvous(WorkerId rank) {
  std::unique_lock lock(mutex_);
  if (aborted_) throw FabricError(abort_reason_);
  present_[rank] = true;
  if (++arrived_ == workers_) {
    arrived_ = 0;
    std::fill(present_.begin(), present_.end(), false);
    ++generation_;
    cv_.notify_all();
    return;
  }
  const std::uint64_t gen = generation_;
  const bool done = cv_.wait_for(lock, timeout_, [&] { return generation_ != gen || aborted_; });
  if (generation_ != gen) return;
  if (aborted_) throw FabricError(abort_reason_);
  if (!done) {
    std::string missing;
    for (std::uint32_t r = 0; r < workers_; ++r) {
      if (!present_[r]) missing += (missing.empty() ? "" : ",") + std::to_string(r);
    }
    abort_reason_ = "timed out waiting for peer(s) " + missing;
    aborted_ = true;
    cv_.notify_all();
    throw FabricError(abort_reason_);
  }
}

}  // namespace dpsnn
