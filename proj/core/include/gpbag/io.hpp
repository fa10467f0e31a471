#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "gpbag/dataset.hpp"

namespace gpbag {

struct LoadSpec {
  char delimiter = ',';
  std::string target;                  // response column; empty = none (the
                                       // loaded y is all zeros, for
                                       // prediction-only inputs)
  std::vector<std::string> features;   // empty = every non-target column
  bool standardize = true;             // standardize after load and record it
};

struct LoadResult {
  Dataset data;
  std::vector<std::string> feature_names;
  std::size_t dropped_rows = 0;  // rows with unparseable or non-finite cells
};

// Reads a delimited text file with a header row. Rows containing cells that
// fail to parse as finite doubles are dropped and counted, never silently
// kept. Throws InputError for a missing file, unknown target/feature
// columns, or zero usable rows, and ParseError for files with no header
// structure at all.
LoadResult load_delimited(const std::filesystem::path& path, const LoadSpec& spec);

// Writes a header plus data rows; values are printed with enough digits to
// round-trip.
void save_delimited(const std::filesystem::path& path, const Dataset& data,
                    const std::vector<std::string>& feature_names,
                    const std::string& target_name, char delimiter = ',');

}  // namespace gpbag
