#include <catch_amalgamated.hpp>

#include "eegattn/io.hpp"
#include "eegattn/synth.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

using namespace eegattn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("eegattn_io_" + std::to_string(::getpid()))) { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

ErrorCode code_of(const std::function<void()>& f, std::string* what = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("dataset files round-trip exactly and are byte-stable") {
  TempDir tmp;
  synth::GeneratorConfig c;
  c.subjects = 2;
  c.blocks_per_class = 1;
  std::vector<EegRecord> recs;
  for (const auto& g : synth::generate_dataset(c)) recs.push_back(g.record);
  recs.back().label = Label::Unlabeled;
  io::write_dataset(tmp / "a.jsonl", recs);
  const auto back = io::read_dataset(tmp / "a.jsonl");
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].subject_id == recs[i].subject_id);
    CHECK(back[i].block_id == recs[i].block_id);
    CHECK(back[i].label == recs[i].label);
    CHECK(back[i].samples == recs[i].samples);
    REQUIRE(back[i].aux);
    CHECK(back[i].aux->channels == recs[i].aux->channels);
    CHECK(back[i].aux->synthetic);
  }
  io::write_dataset(tmp / "b.jsonl", back);
  CHECK(slurp(tmp / "a.jsonl") == slurp(tmp / "b.jsonl"));
}

TEST_CASE("missing and malformed inputs name the file and line") {
  TempDir tmp;
  std::string what;
  CHECK(code_of([&] { io::read_dataset(tmp / "nope.jsonl"); }, &what) == ErrorCode::IoError);
  CHECK(what.find("nope.jsonl") != std::string::npos);

  spit(tmp / "bad.jsonl", R"({"subject_id":"S1","block_id":"B1","label":0,"sample_rate":250,"samples":[1,2,3]})"
                          "\n{oops\n");
  CHECK(code_of([&] { io::read_dataset(tmp / "bad.jsonl"); }, &what) == ErrorCode::ParseError);
  CHECK(what.find("bad.jsonl:2") != std::string::npos);

  spit(tmp / "field.jsonl", R"({"subject_id":"S1","label":0,"samples":[1]})" "\n");
  CHECK(code_of([&] { io::read_dataset(tmp / "field.jsonl"); }) == ErrorCode::ParseError);
  spit(tmp / "empty.json", "");
  CHECK(code_of([&] { io::read_json(tmp / "empty.json"); }) == ErrorCode::ParseError);
}

TEST_CASE("CSV import groups contiguous rows into blocks and infers the rate") {
  TempDir tmp;
  std::string csv = "subject_id,block_id,label,t,eeg_uv,delta,theta,alpha,beta_low,beta_high,gamma,attention,meditation\n";
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 500; ++i) {
      csv += "S1,B" + std::to_string(b) + "," + std::to_string(b) + "," + io::format_double(i / 250.0) + "," +
             io::format_double(0.5 * i) + ",1,2,3,4,5,6," + std::to_string(40 + b) + ",60\n";
    }
  spit(tmp / "d.csv", csv);
  const auto recs = io::read_dataset(tmp / "d.csv");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].sample_rate == 250.0);
  CHECK(recs[0].samples.size() == 500);
  CHECK(recs[0].samples[10] == 5.0);
  CHECK(recs[0].label == Label::Attentive);
  CHECK(recs[1].label == Label::NonAttentive);
  REQUIRE(recs[1].aux);
  CHECK(recs[1].aux->channels[kAuxAttention][0] == 41);
  CHECK_FALSE(recs[1].aux->synthetic);

  spit(tmp / "plain.csv", "subject_id,block_id,label,t,eeg_uv\nS1,B1,,0,1\nS1,B1,,0.004,2\n");
  const auto plain = io::read_dataset(tmp / "plain.csv");
  CHECK(plain[0].label == Label::Unlabeled);
  CHECK_FALSE(plain[0].aux.has_value());

  spit(tmp / "hdr.csv", "subject,block,label,t,eeg\n");
  CHECK(code_of([&] { io::read_dataset(tmp / "hdr.csv"); }) == ErrorCode::ParseError);
  spit(tmp / "num.csv", "subject_id,block_id,label,t,eeg_uv\nS1,B1,0,0,abc\n");
  std::string what;
  CHECK(code_of([&] { io::read_dataset(tmp / "num.csv"); }, &what) == ErrorCode::ParseError);
  CHECK(what.find("num.csv:2") != std::string::npos);
}

TEST_CASE("feature matrices round-trip bit for bit") {
  TempDir tmp;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1e3);
  features::FeatureTable t;
  t.names = {"a", "b", "c"};
  t.values.resize(20, 3);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) t.values(i, j) = g(rng);
    t.subjects.push_back(i < 10 ? "S01" : "S02");
    t.labels.push_back(static_cast<int>(i % 2));
  }
  t.values(0, 0) = 1e-300;
  t.values(1, 1) = 0.1;
  io::write_feature_csv(tmp / "f.csv", t);
  const auto back = io::read_feature_csv(tmp / "f.csv");
  CHECK(back.names == t.names);
  CHECK(back.subjects == t.subjects);
  CHECK(back.labels == t.labels);
  CHECK(back.values == t.values);
}

TEST_CASE("segments round-trip with origin and aux") {
  TempDir tmp;
  Segment s;
  s.samples = {1.5, -2.25, 3.0};
  s.origin = {"S03", "S03-B02", 775};
  s.label = Label::NonAttentive;
  AuxSnapshot a{};
  a[kAuxMeditation] = 55.5;
  s.aux = a;
  Segment u = s;
  u.aux.reset();
  u.label = Label::Unlabeled;
  io::write_segments(tmp / "s.jsonl", {s, u});
  const auto back = io::read_segments(tmp / "s.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].samples == s.samples);
  CHECK(back[0].origin.start_index == 775);
  CHECK(back[0].origin.block_id == "S03-B02");
  CHECK(back[0].label == Label::NonAttentive);
  CHECK((*back[0].aux)[kAuxMeditation] == 55.5);
  CHECK_FALSE(back[1].aux.has_value());
  CHECK(back[1].label == Label::Unlabeled);
}
