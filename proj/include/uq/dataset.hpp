#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uq/tensor.hpp"

namespace uq {

struct LabeledSample {
  std::string id;
  Tensor x;
  Tensor y;
};

using Dataset = std::vector<LabeledSample>;

/// Reads `index.json` ({"ids": [...]} or a bare array) and the
/// `<id>.x.ntsr` / `<id>.y.ntsr` pairs it lists, in index order.
Dataset load_dataset_dir(const std::filesystem::path& dir);

void save_dataset_dir(const std::filesystem::path& dir, const Dataset& data);

}  // namespace uq
