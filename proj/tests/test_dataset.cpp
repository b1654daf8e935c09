#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "alma/dataset.hpp"
#include "alma/errors.hpp"
#include "test_support.hpp"

using namespace alma;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_CASE("serialization round trip") {
  std::mt19937_64 rng(109);
  Dataset d;
  d.shape = {3, 2, 2};
  for (std::size_t i = 0; i < 5; ++i) {
    d.images.push_back(testing::random_tensor(rng, d.shape, 0, 1));
    d.labels.push_back(i * 3);
  }
  const std::string bytes = serialize_dataset(d);
  CHECK(parse_dataset(bytes) == d);
  TempDir dir("alma_test_dataset_rt");
  save_dataset(d, dir.path / "d.bin");
  CHECK(load_dataset(dir.path / "d.bin") == d);

  CHECK_THROWS_AS(parse_dataset(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(parse_dataset(bytes + std::string(1, '\0')), ParseError);
  CHECK_THROWS_AS(parse_dataset("ALMANN1\n"), ParseError);
  CHECK_THROWS_AS(load_dataset(dir.path / "missing.bin"), IoError);

  Dataset broken = d;
  broken.labels.pop_back();
  CHECK_THROWS_AS(broken.validate(), InvalidArgument);
  broken = d;
  broken.images[2] = Tensor(Shape{2, 2, 3});
  CHECK_THROWS_AS(broken.validate(), ShapeError);
}

TEST_CASE("netpbm directory import") {
  TempDir dir("alma_test_dataset_pnm");
  // 2x2 binary colour image with maxval 255.
  write_file(dir.path / "1" / "a.ppm", std::string("P6\n2 2\n255\n") + std::string("\xff\x00\x00\x00\xff\x00\x00\x00\xff\x80\x80\x80", 12));
  // ASCII grayscale with a comment, maxval 4.
  write_file(dir.path / "0" / "b.pgm", "P2\n# comment\n2 2\n4\n0 1\n2 4\n");
  write_file(dir.path / "0" / "notes.txt", "ignored");
  write_file(dir.path / "labels" / "c.pgm", "P2\n2 2\n4\n0 0 0 0\n");

  const Dataset d = import_image_directory(dir.path);
  REQUIRE(d.size() == 2);
  CHECK(d.shape == Shape{3, 2, 2});
  CHECK(d.labels == std::vector<std::size_t>{0, 1});
  // The grayscale image is replicated across channels.
  const Tensor& gray = d.images[0];
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(gray[c * 4 + 0] == 0.0);
    CHECK(gray[c * 4 + 1] == 0.25);
    CHECK(gray[c * 4 + 2] == 0.5);
    CHECK(gray[c * 4 + 3] == 1.0);
  }
  // Interleaved RGB is stored channel-major.
  const Tensor& colour = d.images[1];
  CHECK(colour[0] == 1.0);
  CHECK(colour[4 + 1] == 1.0);
  CHECK(colour[8 + 2] == 1.0);
  CHECK(colour[3] == doctest::Approx(128.0 / 255.0));

  write_file(dir.path / "2" / "bad.pgm", "P2\n2 2\n4\n0 9 0 0\n");
  CHECK_THROWS_AS(import_image_directory(dir.path), ParseError);
  CHECK_THROWS_AS(import_image_directory(dir.path / "nothing"), IoError);
}

TEST_CASE("desk dataset is deterministic and well formed") {
  const Dataset a = make_desk_dataset(40, 5);
  const Dataset b = make_desk_dataset(40, 5);
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  CHECK_FALSE(make_desk_dataset(40, 6) == a);
  CHECK(a.shape == Shape{3, 8, 8});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] == i % 10);
    for (double v : a.images[i].values()) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("sample selection is a seeded prefix of a permutation") {
  const auto s = select_samples(100, 30, 7);
  CHECK(s.size() == 30);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 30);
  for (auto i : s) CHECK(i < 100);
  CHECK(select_samples(100, 30, 7) == s);
  CHECK(select_samples(100, 30, 8) != s);
  const auto all = select_samples(10, 50, 1);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 10);
}
