#include "filtnet/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace filtnet {

namespace {

constexpr char kAxisNames[kAxes] = {'x', 'y', 'z'};

long parse_int(const std::string& s, std::size_t line_no) {
  long v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw FormatError("line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
  }
  return v;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      std::string last = line.substr(start);
      if (!last.empty() && last.back() == '\r') last.pop_back();
      fields.push_back(std::move(last));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << "dataset_id,animal_id,label";
  for (std::size_t d = 0; d < kAxes; ++d) {
    for (std::size_t i = 0; i < ds.segment_length; ++i) out << ',' << kAxisNames[d] << i;
  }
  out << '\n';
  for (const auto& s : ds.segments) {
    out << s.dataset_id << ',' << s.animal_id << ',' << s.label;
    for (const auto& axis : s.readings) {
      for (auto v : axis) out << ',' << v;
    }
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in, std::vector<std::string> class_names) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 6 || header[0] != "dataset_id" || header[1] != "animal_id" || header[2] != "label") {
    throw FormatError("dataset CSV header must start with dataset_id,animal_id,label");
  }
  if ((header.size() - 3) % kAxes != 0) throw FormatError("dataset CSV must have 3N sample columns");
  const std::size_t n = (header.size() - 3) / kAxes;
  for (std::size_t d = 0; d < kAxes; ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string expected = std::string(1, kAxisNames[d]) + std::to_string(i);
      if (header[3 + d * n + i] != expected) {
        throw FormatError("dataset CSV column " + std::to_string(3 + d * n + i) + " should be '" + expected + "'");
      }
    }
  }

  Dataset ds;
  ds.class_names = std::move(class_names);
  ds.segment_length = n;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    Segment s;
    s.dataset_id = fields[0];
    s.animal_id = fields[1];
    const long label = parse_int(fields[2], line_no);
    if (label < 0) throw FormatError("line " + std::to_string(line_no) + ": negative label");
    s.label = static_cast<std::size_t>(label);
    for (std::size_t d = 0; d < kAxes; ++d) {
      auto& axis = s.readings[d];
      axis.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const long v = parse_int(fields[3 + d * n + i], line_no);
        if (v < std::numeric_limits<std::int16_t>::min() || v > std::numeric_limits<std::int16_t>::max()) {
          throw FormatError("line " + std::to_string(line_no) + ": sample " + std::to_string(v) +
                            " outside signed 16-bit range");
        }
        axis[i] = static_cast<std::int16_t>(v);
      }
    }
    ds.segments.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

std::string default_classes_path(const std::string& csv_path) { return csv_path + ".classes"; }

void write_class_names(std::ostream& out, const std::vector<std::string>& names) {
  for (const auto& n : names) out << n << '\n';
}

std::vector<std::string> read_class_names(std::istream& in) {
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

void save_dataset(const std::string& csv_path, const Dataset& ds) {
  std::ofstream csv(csv_path);
  if (!csv) throw FormatError("cannot open '" + csv_path + "' for writing");
  write_dataset_csv(csv, ds);
  std::ofstream names(default_classes_path(csv_path));
  if (!names) throw FormatError("cannot write class manifest for '" + csv_path + "'");
  write_class_names(names, ds.class_names);
}

Dataset load_dataset(const std::string& csv_path, const std::string& classes_path) {
  const std::string manifest = classes_path.empty() ? default_classes_path(csv_path) : classes_path;
  std::ifstream names_in(manifest);
  if (!names_in) throw FormatError("cannot open class manifest '" + manifest + "'");
  auto names = read_class_names(names_in);
  if (names.size() < 2) throw FormatError("class manifest '" + manifest + "' lists fewer than 2 classes");
  std::ifstream in(csv_path);
  if (!in) throw FormatError("cannot open dataset '" + csv_path + "'");
  return read_dataset_csv(in, std::move(names));
}

}  // namespace filtnet
