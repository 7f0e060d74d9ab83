#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fedsubsel/dataset.hpp"
#include "fedsubsel/submodular.hpp"

namespace fedsubsel {

// One simulated client. The cached gradient and loss are evaluated on the
// client's full training split and go stale between participations.
struct ClientState {
  ClientId id = 0;
  LabeledDataset train;
  LabeledDataset test;
  std::optional<std::vector<double>> cached_gradient;
  std::optional<double> cached_loss;
  std::size_t participation_count = 0;
};

inline std::vector<ClientState> make_clients(std::vector<ClientSplit> splits) {
  std::vector<ClientState> clients(splits.size());
  for (std::size_t i = 0; i < splits.size(); ++i) {
    clients[i].id = i;
    clients[i].train = std::move(splits[i].train);
    clients[i].test = std::move(splits[i].test);
  }
  return clients;
}

}  // namespace fedsubsel
