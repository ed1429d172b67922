#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flowlab/net.hpp"
#include "flowlab/optim.hpp"

namespace flowlab {

inline constexpr int kContainerVersion = 1;

// Named-array container: JSON manifest (names, shapes, byte offsets, version)
// followed by a little-endian float64 payload. Round-trips bit-exactly.
struct ArrayEntry {
    std::string name;
    Tensor tensor;
};

void save_container(const std::string& path, const std::vector<ArrayEntry>& arrays,
                    const nlohmann::json& meta = nlohmann::json::object());
std::vector<ArrayEntry> load_container(const std::string& path, nlohmann::json* meta_out = nullptr);

void save_train_state(const std::string& path, const TrainState& state);
TrainState load_train_state(const std::string& path);

void save_net(const std::string& path, const VelocityNet& net);
VelocityNet load_net(const std::string& path);

}  // namespace flowlab
