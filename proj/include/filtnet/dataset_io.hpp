#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "filtnet/core_model.hpp"

namespace filtnet {

// Dataset CSV: header `dataset_id,animal_id,label,x0..x{N-1},y0..y{N-1},z0..z{N-1}`,
// one segment per row, integer counts. Class names live in a sidecar text file
// (one name per line, index order), by default `<csv path>.classes`.

void write_dataset_csv(std::ostream& out, const Dataset& ds);
Dataset read_dataset_csv(std::istream& in, std::vector<std::string> class_names);

std::string default_classes_path(const std::string& csv_path);

void write_class_names(std::ostream& out, const std::vector<std::string>& names);
std::vector<std::string> read_class_names(std::istream& in);

/// Writes `csv_path` and its sidecar class manifest.
void save_dataset(const std::string& csv_path, const Dataset& ds);

/// Reads `csv_path`; class names come from `classes_path` (or the default
/// sidecar). Throws FormatError on malformed input, DimensionError on
/// inconsistent shapes or labels.
Dataset load_dataset(const std::string& csv_path, const std::string& classes_path = "");

/// Splits one CSV line on commas (no quoting; fields never contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace filtnet
