#pragma once

#include "mrcp/nn/cnn.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace mrcp::nn {

/// "MRCN" checkpoint: spec, seed, layer constants, then every parameter and
/// running-statistics array by name. Doubles are stored verbatim.
std::string serialize_cnn(const CnnModel& model);
CnnModel deserialize_cnn(std::string_view bytes);

void save_cnn(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_cnn(const std::filesystem::path& path);

}  // namespace mrcp::nn
