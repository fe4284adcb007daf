#pragma once

#include <iosfwd>
#include <set>
#include <string>

#include "ascore/cli/pipeline.hpp"
#include "ascore/config.hpp"
#include "ascore/data/sparse_gt.hpp"
#include "ascore/data/synthetic.hpp"

namespace ascore::cli {

// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// Subcommands gen-scene, train, eval, localize and render-attention, each
// taking --config <file>, --seed <int>, --out <dir> and repeatable
// --set key=value overrides. Usage and configuration errors return 1,
// runtime failures 2.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Config readers shared by the subcommands; unset keys keep the defaults.
data::SyntheticSceneSpec scene_spec_from_config(const KeyValueConfig& cfg);
data::DetectorConfig detector_from_config(const KeyValueConfig& cfg);
data::SparseGtConfig sparse_gt_from_config(const KeyValueConfig& cfg);
geometry::RansacConfig ransac_from_config(const KeyValueConfig& cfg, std::uint64_t seed);
KeyValueConfig detector_to_config(const data::DetectorConfig& detector);

const std::set<std::string>& scene_keys();
const std::set<std::string>& detector_keys();
const std::set<std::string>& sparse_gt_keys();
const std::set<std::string>& ransac_keys();

}  // namespace ascore::cli
