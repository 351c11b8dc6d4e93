#pragma once

#include <span>
#include <string>
#include <vector>

namespace regscore {

enum class Mode { train, eval };

/// Named view of one learnable tensor. Weight and gradient containers expose
/// their tensors in the same order so the two lists can be zipped.
struct ParamView {
    std::string name;
    std::span<double> values;
};

using ParamList = std::vector<ParamView>;

}  // namespace regscore
