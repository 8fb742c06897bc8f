#include "dpsnn/partition.hpp"

#include <stdexcept>
#include <string>

namespace dpsnn {

PartitionPlan::PartitionPlan(std::uint32_t workers, std::uint32_t total_neurons,
                             std::uint32_t columns)
    : workers_(workers), total_neurons_(total_neurons), loc_n_(0) {
  if (workers == 0) throw ConfigError("workers", "must be >= 1");
  if (columns == 0 || total_neurons % columns != 0)
    throw ConfigError("columns", "total neurons must be a whole number of columns");
  if (total_neurons % workers != 0)
    throw ConfigError("workers", std::to_string(workers) + " workers do not evenly divide " +
                                     std::to_string(total_neurons) + " neurons");
  if (columns % workers != 0 && workers % columns != 0)
    throw ConfigError("workers", "each worker must hold whole columns or an equal fraction of one (" +
                                     std::to_string(workers) + " workers, " +
                                     std::to_string(columns) + " columns)");
  loc_n_ = total_neurons / workers;
}

WorkerId PartitionPlan::owner_of(Gid gid) const {
  if (gid >= total_neurons_)
    throw std::out_of_range("gid " + std::to_string(gid) + " >= N=" + std::to_string(total_neurons_));
  return gid / loc_n_;
}

LocalAddress PartitionPlan::local_index(Gid gid) const {
  const WorkerId w = owner_of(gid);
  return {w, gid - w * loc_n_};
}

Gid PartitionPlan::global_of(WorkerId worker, std::uint32_t local) const {
  if (worker >= workers_)
    throw std::out_of_range("worker " + std::to_string(worker) + " >= H=" + std::to_string(workers_));
  if (local >= loc_n_)
    throw std::out_of_range("local id " + std::to_string(local) + " >= loc_n=" + std::to_string(loc_n_));
  return worker * loc_n_ + local;
}

}  // namespace dpsnn
