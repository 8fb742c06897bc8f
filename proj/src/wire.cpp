#include "dpsnn/wire.hpp"

#include <bit>
#include <cstring>
#include <string>

namespace dpsnn::wire {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(get_u32(p)) | static_cast<std::uint64_t>(get_u32(p + 4)) << 32;
}

}  // namespace

Bytes encode_spike_batch(WorkerId source_worker, std::span<const AxonalSpike> spikes) {
  Bytes out;
  if (spikes.empty()) return out;
  out.reserve(spike_batch_bytes(spikes.size()));
  put_u32(out, source_worker);
  put_u32(out, static_cast<std::uint32_t>(spikes.size()));
  for (const AxonalSpike& s : spikes) {
    put_u32(out, s.source_gid);
    put_u32(out, static_cast<std::uint32_t>(s.emission_time));
  }
  return out;
}

SpikeBatch decode_spike_batch(std::span<const std::uint8_t> bytes) {
  SpikeBatch batch;
  if (bytes.empty()) return batch;
  if (bytes.size() < kSpikeHeaderBytes)
    throw ProtocolError("spike batch shorter than its header (" + std::to_string(bytes.size()) + " bytes)");
  batch.source_worker = get_u32(bytes.data());
  const std::uint32_t count = get_u32(bytes.data() + 4);
  if (bytes.size() != spike_batch_bytes(count))
    throw ProtocolError("spike batch header announces " + std::to_string(count) +
                        " records but carries " + std::to_string(bytes.size()) + " bytes");
  batch.spikes.resize(count);
  const std::uint8_t* p = bytes.data() + kSpikeHeaderBytes;
  for (std::uint32_t i = 0; i < count; ++i, p += kSpikeRecordBytes) {
    batch.spikes[i].source_gid = get_u32(p);
    batch.spikes[i].emission_time = static_cast<TimeMs>(get_u32(p + 4));
  }
  return batch;
}

void append_synapse(Bytes& out, const SynapseRecord& s) {
  put_u32(out, s.source_gid);
  put_u32(out, s.target_gid);
  put_u32(out, s.projection_index);
  put_u16(out, s.delay);
  put_u16(out, 0);
  put_u64(out, std::bit_cast<std::uint64_t>(s.weight));
}

std::vector<SynapseRecord> decode_synapses(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kSynapseRecordBytes != 0)
    throw ProtocolError("synapse payload of " + std::to_string(bytes.size()) +
                        " bytes is not a whole number of records");
  std::vector<SynapseRecord> out(bytes.size() / kSynapseRecordBytes);
  const std::uint8_t* p = bytes.data();
  for (auto& s : out) {
    s.source_gid = get_u32(p);
    s.target_gid = get_u32(p + 4);
    s.projection_index = get_u32(p + 8);
    s.delay = get_u16(p + 12);
    s.weight = std::bit_cast<double>(get_u64(p + 16));
    p += kSynapseRecordBytes;
  }
  return out;
}

}  // namespace dpsnn::wire
