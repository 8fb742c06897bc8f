#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpsnn/connectome.hpp"
#include "dpsnn/types.hpp"

// Byte layouts exchanged between workers. All integers little-endian, packed.
//
// Spike batch:   header  u32 source_worker, u32 count
//                record  u32 source_gid, u32 emission_time_ms     (count times)
// Synapse list:  record  u32 source_gid, u32 target_gid, u32 projection_index,
//                        u16 delay, u16 reserved(0), f64 weight   (no header)
namespace dpsnn::wire {

inline constexpr std::size_t kSpikeHeaderBytes = 8;
inline constexpr std::size_t kSpikeRecordBytes = 8;
inline constexpr std::size_t kSynapseRecordBytes = 24;

struct AxonalSpike {
  Gid source_gid = 0;
  TimeMs emission_time = 0;

  bool operator==(const AxonalSpike&) const = default;
};

struct SpikeBatch {
  WorkerId source_worker = 0;
  std::vector<AxonalSpike> spikes;
};

constexpr std::uint64_t spike_batch_bytes(std::uint64_t count) noexcept {
  return count == 0 ? 0 : kSpikeHeaderBytes + kSpikeRecordBytes * count;
}

Bytes encode_spike_batch(WorkerId source_worker, std::span<const AxonalSpike> spikes);
/// Throws ProtocolError on a truncated buffer or a header that disagrees with
/// the body length.
SpikeBatch decode_spike_batch(std::span<const std::uint8_t> bytes);

void append_synapse(Bytes& out, const SynapseRecord& s);
/// Throws ProtocolError if the length is not a whole number of records.
std::vector<SynapseRecord> decode_synapses(std::span<const std::uint8_t> bytes);

}  // namespace dpsnn::wire
