#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "filtnet/dataset_io.hpp"
#include "helpers.hpp"

using namespace filtnet;

namespace {

Dataset sample_dataset() {
  Dataset ds;
  ds.class_names = {"grazing", "ruminating/resting", "other"};
  ds.segment_length = 5;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 7; ++i) {
    auto s = testing::random_segment(5, rng, -32768, 32767);
    s.label = i % 3;
    s.animal_id = "cow" + std::to_string(i % 2);
    s.dataset_id = "farm";
    ds.segments.push_back(s);
  }
  return ds;
}

}  // namespace

TEST_CASE("split_csv_line") {
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_line("x") == std::vector<std::string>{"x"});
  CHECK(split_csv_line("1,2\r") == std::vector<std::string>{"1", "2"});
}

TEST_CASE("dataset CSV round trip") {
  const auto ds = sample_dataset();
  std::ostringstream out;
  write_dataset_csv(out, ds);
  const std::string text = out.str();
  CHECK(text.rfind("dataset_id,animal_id,label,x0,x1,x2,x3,x4,y0,", 0) == 0);

  std::istringstream in(text);
  const auto back = read_dataset_csv(in, ds.class_names);
  REQUIRE(back.segments.size() == ds.segments.size());
  CHECK(back.segment_length == 5);
  for (std::size_t i = 0; i < ds.segments.size(); ++i) {
    CHECK(back.segments[i].readings == ds.segments[i].readings);
    CHECK(back.segments[i].label == ds.segments[i].label);
    CHECK(back.segments[i].animal_id == ds.segments[i].animal_id);
    CHECK(back.segments[i].dataset_id == "farm");
  }
}

TEST_CASE("dataset CSV errors") {
  const std::vector<std::string> names = {"a", "b"};
  auto parse = [&](const std::string& s) {
    std::istringstream in(s);
    return read_dataset_csv(in, names);
  };
  CHECK_THROWS_AS(parse(""), FormatError);
  CHECK_THROWS_AS(parse("id,animal,label,x0,y0,z0\n"), FormatError);
  CHECK_THROWS_AS(parse("dataset_id,animal_id,label,x0,y0\n"), FormatError);
  CHECK_THROWS_AS(parse("dataset_id,animal_id,label,x0,y0,z1\n"), FormatError);
  const std::string header = "dataset_id,animal_id,label,x0,y0,z0\n";
  CHECK_NOTHROW(parse(header + "d,a,1,1,2,3\n"));
  CHECK_THROWS_AS(parse(header + "d,a,1,1,2\n"), FormatError);
  CHECK_THROWS_AS(parse(header + "d,a,1,1,2,3.5\n"), FormatError);
  CHECK_THROWS_AS(parse(header + "d,a,1,1,2,40000\n"), FormatError);
  CHECK_THROWS_AS(parse(header + "d,a,-1,1,2,3\n"), FormatError);
  CHECK_THROWS_AS(parse(header + "d,a,2,1,2,3\n"), DimensionError);
}

TEST_CASE("files and class manifests") {
  const auto dir = std::filesystem::temp_directory_path() / "filtnet_dataset_io_test";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "data.csv").string();
  const auto ds = sample_dataset();
  save_dataset(csv, ds);
  CHECK(default_classes_path(csv) == csv + ".classes");
  CHECK(std::filesystem::exists(csv + ".classes"));
  const auto back = load_dataset(csv);
  CHECK(back.class_names == ds.class_names);
  CHECK(back.segments.size() == ds.segments.size());

  std::istringstream names("a\r\n\nb\n");
  CHECK(read_class_names(names) == std::vector<std::string>{"a", "b"});

  CHECK_THROWS_AS(load_dataset((dir / "missing.csv").string()), FormatError);
  CHECK_THROWS_AS(load_dataset(csv, (dir / "missing.classes").string()), FormatError);
  std::filesystem::remove_all(dir);
}
