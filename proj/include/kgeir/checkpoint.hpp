#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "kgeir/cdm.hpp"

namespace kgeir {

// Model checkpoint: <dir>/manifest.json (kind, shapes, seed, config hash)
// plus <dir>/params.csv with one value per row. NACD bundles its weighted
// Q-matrix so a checkpoint reloads without the original weights table.
void save_checkpoint(const Cdm& model, const std::string& dir, std::uint64_t seed,
                     std::uint64_t config_hash);
std::unique_ptr<Cdm> load_checkpoint(const std::string& dir);

}  // namespace kgeir
