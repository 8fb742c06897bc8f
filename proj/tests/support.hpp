#pragma once

#include <exception>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "dpsnn/engine.hpp"
#include "dpsnn/fabric.hpp"

namespace dpsnn::testing {

inline GridSpec small_grid(std::uint32_t cfx, std::uint32_t cfy, std::uint32_t npc = 1000,
                           std::uint32_t m = 200) {
  GridSpec g;
  g.cfx = cfx;
  g.cfy = cfy;
  g.neurons_per_column = npc;
  g.synapses_per_neuron = m;
  return g;
}

// Runs `body` once per worker, each on its own thread with its own engine,
// after construct_network(). Rethrows the first failure.
inline void with_engines(const Connectome& connectome, std::uint32_t workers, const EngineOptions& options,
                         const std::function<void(Engine&)>& body) {
  const PartitionPlan plan(workers, connectome.grid());
  if (workers == 1) {
    LoopbackEndpoint ep;
    Engine engine(connectome, plan, options, ep);
    engine.construct_network();
    body(engine);
    return;
  }
  ThreadFabric fabric(workers, std::chrono::seconds(60));
  std::vector<std::unique_ptr<Endpoint>> endpoints;
  for (WorkerId r = 0; r < workers; ++r) endpoints.push_back(fabric.endpoint(r));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (WorkerId r = 0; r < workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        Engine engine(connectome, plan, options, *endpoints[r]);
        engine.construct_network();
        body(engine);
      } catch (...) {
        errors[r] = std::current_exception();
        fabric.abort();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dpsnn::testing
