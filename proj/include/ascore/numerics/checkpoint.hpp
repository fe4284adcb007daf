#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ascore/numerics/parameters.hpp"

namespace ascore::numerics {

// Binary layout: "ASCR1", then per parameter
//   u32 name_len | name bytes | u32 rank | u32 dims[rank] | f64 values[numel]
// with every integer and float little-endian. Parameters run to end of file.
inline constexpr char kCheckpointMagic[] = "ASCR1";

void write_checkpoint(std::ostream& out, const ParameterSet& params);
std::vector<Parameter> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
std::vector<Parameter> read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `params` by name. Every parameter must be
// present with an identical shape.
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace ascore::numerics
