#pragma once

#include <cstdint>

#include "dpsnn/connectome.hpp"
#include "dpsnn/types.hpp"

namespace dpsnn {

struct LocalAddress {
  WorkerId worker = 0;
  std::uint32_t local = 0;

  bool operator==(const LocalAddress&) const = default;
};

// Fair-share mapping of N neurons onto H workers as contiguous gid blocks.
class PartitionPlan {
 public:
  /// Throws ConfigError unless H divides N and the blocks are whole columns
  /// or whole fractions of a column.
  PartitionPlan(std::uint32_t workers, std::uint32_t total_neurons, std::uint32_t columns);
  PartitionPlan(std::uint32_t workers, const GridSpec& grid)
      : PartitionPlan(workers, grid.total_neurons(), grid.columns()) {}

  std::uint32_t workers() const noexcept { return workers_; }
  std::uint32_t total_neurons() const noexcept { return total_neurons_; }
  std::uint32_t local_count() const noexcept { return loc_n_; }

  WorkerId owner_of(Gid gid) const;
  LocalAddress local_index(Gid gid) const;
  Gid global_of(WorkerId worker, std::uint32_t local) const;
  Gid first_gid(WorkerId worker) const { return global_of(worker, 0); }

 private:
  std::uint32_t workers_;
  std::uint32_t total_neurons_;
  std::uint32_t loc_n_;
};

}  // namespace dpsnn
