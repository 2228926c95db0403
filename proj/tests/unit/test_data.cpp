#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <type_traits>

#include "doctest.h"

#include "tmd/data/dataset.hpp"
#include "tmd/errors.hpp"

using namespace tmd;
namespace fs = std::filesystem;

// Test labels are only reachable through the trainer's gatekeeper.
static_assert(!std::is_default_constructible_v<data::TestLabelKey>);
static_assert(!std::is_constructible_v<data::HeldOutTestSet>);

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string row_of(std::size_t n, const std::string& value) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + value;
  return s + "\n";
}

}  // namespace

TEST_CASE("label codes map to the eight classes") {
  for (int code = 1; code <= 8; ++code) {
    const auto c = data::class_from_code(code);
    CHECK(static_cast<int>(c) == code);
    CHECK(data::class_index(c) == static_cast<std::size_t>(code - 1));
    CHECK(data::class_from_index(code - 1) == c);
  }
  CHECK(data::class_name(data::ClassLabel::kSubway) == "Subway");
  CHECK_THROWS_AS(data::class_from_code(0), DatasetError);
  CHECK_THROWS_AS(data::class_from_code(9), DatasetError);
}

TEST_CASE("the recording label is the one at t = 30 s") {
  data::RawRecording r;
  r.labels.assign(6000, 1);
  r.labels[data::kLabelIndex] = 5;
  CHECK(data::assign_label(r) == data::ClassLabel::kCar);
  r.labels.resize(3000);
  CHECK_THROWS_AS(data::assign_label(r), DatasetError);
}

TEST_CASE("chronological split at full scale") {
  auto s = data::chronological_split(16310);
  CHECK(s.validation.size() == 3000);
  CHECK(s.train.size() == 13000);
  CHECK(s.discarded == 310);
  CHECK(s.validation.front() == 0);
  CHECK(s.validation.back() == 2999);
  CHECK(s.train.front() == 3310);
  CHECK(s.train.back() == 16309);
  s = data::chronological_split(16000);
  CHECK(s.discarded == 0);
  CHECK(s.train.front() == 3000);
}

TEST_CASE("chronological split at desk scale keeps the proportions") {
  // 640 * 3000 / 16310 = 117.7 and 640 * 13000 / 16310 = 510.1.
  const auto s = data::chronological_split(640);
  CHECK(s.validation.size() == 118);
  CHECK(s.train.size() == 510);
  CHECK(s.discarded == 12);
  CHECK_THROWS_AS(data::chronological_split(1), ConfigError);
  CHECK_THROWS_AS(data::chronological_split(0), ConfigError);
}

TEST_CASE("split property: disjoint, ordered, proportional") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> dist(3, 20000);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = dist(rng);
    const auto s = data::chronological_split(n);
    CHECK(s.validation.size() + s.train.size() + s.discarded == n);
    CHECK(s.validation.back() < s.train.front());
    CHECK(s.train.back() == n - 1);
    if (n < 16000) {
      CHECK(std::abs(static_cast<double>(s.validation.size()) - n * 3000.0 / 16310.0) <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("selectors: names, parsing and source channels") {
  using data::Axis;
  using data::Sensor;
  const auto acc = data::ChannelSelector::parse("|Acc|");
  CHECK(acc == data::ChannelSelector{Sensor::kAcc, Axis::kNorm});
  CHECK(acc.name() == "|Acc|");
  CHECK(data::ChannelSelector::parse("Acc:norm") == acc);
  CHECK(data::ChannelSelector::parse("Acc_norm") == acc);
  CHECK(data::ChannelSelector::parse("Gyr_y").name() == "Gyr_y");
  CHECK(data::ChannelSelector::parse("Gyr:y") == data::ChannelSelector{Sensor::kGyr, Axis::kY});
  CHECK(data::ChannelSelector::parse("Pressure").name() == "Pressure");
  CHECK(data::ChannelSelector::parse("Ori_w").source_channels() == std::vector<std::string>{"Ori_w"});
  CHECK(data::ChannelSelector::parse("|Ori|").source_channels().size() == 4);
  CHECK(data::ChannelSelector::parse("|Mag|").source_channels() ==
        std::vector<std::string>{"Mag_x", "Mag_y", "Mag_z"});
  CHECK_THROWS_AS(data::ChannelSelector::parse("Acc_w"), ConfigError);
  CHECK_THROWS_AS(data::ChannelSelector::parse("Pressure_x"), ConfigError);
  CHECK_THROWS_AS(data::ChannelSelector::parse("Foo_x"), ConfigError);
}

TEST_CASE("the per-signal grid has 26 distinct cells") {
  const auto& g = data::per_signal_grid();
  CHECK(g.size() == 26);
  std::set<std::string> names;
  for (const auto& s : g) {
    CHECK(s.valid());
    names.insert(s.name());
    CHECK(data::ChannelSelector::parse(s.name()) == s);
  }
  CHECK(names.size() == 26);
  CHECK(names.count("Ori_w") == 1);
  CHECK(names.count("Pressure") == 1);
  CHECK(data::channel_ids().size() == 20);
}

TEST_CASE("norm selection over raw channels") {
  data::RawRecording r;
  for (const auto& id : data::channel_ids()) r.channels[id].values = {0.0f, 1.0f};
  r.channels["Acc_x"].values = {3.0f, 1.0f};
  r.channels["Acc_y"].values = {4.0f, 1.0f};
  r.channels["Acc_z"].values = {0.0f, 1.0f};
  const std::array<data::ChannelSelector, 2> sel{data::ChannelSelector::parse("|Acc|"),
                                                  data::ChannelSelector::parse("Acc_y")};
  const auto out = data::select_channels(r, sel);
  CHECK(out[0].values[0] == 5.0f);
  CHECK(out[0].values[1] == doctest::Approx(std::sqrt(3.0)));
  CHECK(out[1].values[0] == 4.0f);
  CHECK(data::required_channels(sel) == std::vector<std::string>{"Acc_x", "Acc_y", "Acc_z"});
}

TEST_CASE("synthetic generator: determinism, balance and physical structure") {
  const auto a = data::generate_synthetic(5, 3), b = data::generate_synthetic(5, 3), c = data::generate_synthetic(6, 3);
  REQUIRE(a.size() == 24);
  CHECK(a[7].channel("Acc_x").values == b[7].channel("Acc_x").values);
  CHECK(a[7].channel("Acc_x").values != c[7].channel("Acc_x").values);
  std::vector<int> counts(8, 0);
  for (const auto& r : a) {
    ++counts[data::class_index(data::assign_label(r))];
    CHECK(r.channels.size() == 20);
    for (const auto& [id, sig] : r.channels) CHECK(sig.size() == 6000);
  }
  for (int n : counts) CHECK(n == 3);
  // Gravity has magnitude g, the orientation quaternion unit norm.
  const auto& r = a[0];
  for (std::size_t i = 0; i < 6000; i += 600) {
    const double gx = r.channel("Gra_x").values[i], gy = r.channel("Gra_y").values[i], gz = r.channel("Gra_z").values[i];
    CHECK(std::sqrt(gx * gx + gy * gy + gz * gz) == doctest::Approx(9.81).epsilon(1e-3));
    double q = 0.0;
    for (const char* id : {"Ori_w", "Ori_x", "Ori_y", "Ori_z"}) q += std::pow(r.channel(id).values[i], 2);
    CHECK(q == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("SHL directory round trip, with and without an order file") {
  TempDir dir("tmd_shl_roundtrip");
  const auto recs = data::generate_synthetic(9, 2);
  data::write_shl_directory(recs, dir.path);
  const auto loaded = data::load_shl_directory(dir.path);
  REQUIRE(loaded.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(loaded[i].labels == recs[i].labels);
    CHECK(loaded[i].channel("Mag_z").values == recs[i].channel("Mag_z").values);
    CHECK(loaded[i].channel("Pressure").values == recs[i].channel("Pressure").values);
  }
  const auto only = data::load_shl_directory(dir.path, data::Manifest::defaults(), {"Gyr_y"});
  CHECK(only[0].channels.size() == 1);

  // Lines stored shuffled, with the chronological position of each line.
  TempDir shuffled("tmd_shl_shuffled");
  auto m = data::Manifest::defaults();
  m.order_file = "order.txt";
  std::vector<data::RawRecording> reversed(recs.rbegin(), recs.rend());
  for (std::size_t i = 0; i < reversed.size(); ++i) reversed[i].order_index = recs.size() - 1 - i;
  data::write_shl_directory(reversed, shuffled.path, m);
  const auto restored = data::load_shl_directory(shuffled.path, m, {"Acc_x"});
  REQUIRE(restored.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(restored[i].channel("Acc_x").values == recs[i].channel("Acc_x").values);
}

TEST_CASE("loader errors carry file and line") {
  TempDir dir("tmd_shl_errors");
  const auto m = data::Manifest::defaults();
  write_file(dir.path / "Label.txt", row_of(6000, "1") + row_of(6000, "2"));
  auto expect = [&](const std::string& content, long line, const std::string& needle) {
    write_file(dir.path / "Acc_x.txt", content);
    try {
      data::load_shl_directory(dir.path, m, {"Acc_x"});
      FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
      CHECK(fs::path(e.file()).filename() == "Acc_x.txt");
      CHECK(e.line() == line);
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  expect(row_of(6000, "0.5") + row_of(5999, "0.5"), 2, "expected 6000");
  expect(row_of(6000, "0.5") + row_of(6000, "abc"), 2, "unparseable");
  expect(row_of(6000, "nan"), 1, "non-finite");
  expect(row_of(6000, "0.5"), -1, "recordings");

  write_file(dir.path / "Acc_x.txt", row_of(6000, "0.5") + row_of(6000, "0.5"));
  write_file(dir.path / "Label.txt", row_of(6000, "1") + row_of(6000, "0"));
  CHECK_THROWS_AS(data::load_shl_directory(dir.path, m, {"Acc_x"}), DatasetError);
  fs::remove(dir.path / "Acc_x.txt");
  CHECK_THROWS_AS(data::load_shl_directory(dir.path, m, {"Acc_x"}), DatasetError);
  CHECK_THROWS_AS(data::load_shl_directory(dir.path / "missing", m), DatasetError);
  CHECK_THROWS_AS(data::load_shl_directory(dir.path, m, {"Acc_q"}), ConfigError);
}

TEST_CASE("blank lines, tabs and commas are accepted") {
  TempDir dir("tmd_shl_separators");
  std::string line;
  for (int i = 0; i < 6000; ++i) line += (i ? (i % 2 ? "\t" : ",") : "") + std::to_string(i % 7);
  write_file(dir.path / "x.txt", "\n" + line + "\r\n\n" + line + "\n");
  const auto rows = data::read_channel_file(dir.path / "x.txt");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][13] == 6.0f);
}

TEST_CASE("manifests override file names and reject unknown keys") {
  TempDir dir("tmd_manifest");
  write_file(dir.path / "m.ini", "Acc_x = accx.dat\norder = order.txt\n");
  const auto m = data::Manifest::load(dir.path / "m.ini");
  CHECK(m.files.at("Acc_x") == "accx.dat");
  CHECK(m.files.at("Acc_y") == "Acc_y.txt");
  CHECK(m.order_file == std::optional<std::string>("order.txt"));
  write_file(dir.path / "bad.ini", "Accx = a.dat\n");
  CHECK_THROWS_AS(data::Manifest::load(dir.path / "bad.ini"), DatasetError);
  CHECK_THROWS_AS(data::Manifest::load(dir.path / "none.ini"), DatasetError);
}

TEST_CASE("the held-out set strips labels from its recordings") {
  const data::HeldOutTestSet test(data::generate_synthetic(2, 1));
  CHECK(test.size() == 8);
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(test.recording(i).labels.empty());
    CHECK(test.recording(i).channels.size() == 20);
  }
}
