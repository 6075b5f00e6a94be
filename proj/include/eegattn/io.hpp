#pragma once

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "features.hpp"

namespace eegattn::io {

inline std::ifstream open_in(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, "input file not found: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Dataset: one JSON object per block per line.

inline nlohmann::json record_to_json(const EegRecord& r) {
  nlohmann::json j;
  j["subject_id"] = r.subject_id;
  j["block_id"] = r.block_id;
  j["label"] = is_labeled(r.label) ? nlohmann::json(static_cast<int>(r.label)) : nlohmann::json(nullptr);
  j["sample_rate"] = r.sample_rate;
  j["samples"] = r.samples;
  if (r.aux) {
    nlohmann::json a;
    a["rate_hz"] = r.aux->rate_hz;
    a["synthetic"] = r.aux->synthetic;
    for (std::size_t c = 0; c < kAuxChannelCount; ++c) a[std::string(kAuxChannelNames[c])] = r.aux->channels[c];
    j["aux"] = a;
  }
  return j;
}

inline EegRecord record_from_json(const nlohmann::json& j) {
  EegRecord r;
  try {
    r.subject_id = j.at("subject_id").get<std::string>();
    r.block_id = j.at("block_id").get<std::string>();
    const auto& l = j.at("label");
    r.label = l.is_null() ? Label::Unlabeled : (l.get<int>() == 0 ? Label::Attentive : Label::NonAttentive);
    r.sample_rate = j.value("sample_rate", 250.0);
    r.samples = j.at("samples").get<std::vector<double>>();
    if (j.contains("aux") && !j["aux"].is_null()) {
      const auto& a = j["aux"];
      AuxSeries aux;
      aux.rate_hz = a.value("rate_hz", 1.0);
      aux.synthetic = a.value("synthetic", false);
      for (std::size_t c = 0; c < kAuxChannelCount; ++c)
        aux.channels[c] = a.at(std::string(kAuxChannelNames[c])).get<std::vector<double>>();
      r.aux = std::move(aux);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed record: ") + e.what());
  }
  r.validate();
  return r;
}

inline void write_dataset(const std::string& path, const std::vector<EegRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline std::vector<EegRecord> read_jsonl_dataset(const std::string& path) {
  auto in = open_in(path);
  std::vector<EegRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  const char* b = s.data();
  while (b < s.data() + s.size() && *b == ' ') ++b;
  auto res = std::from_chars(b, s.data() + s.size(), v);
  if (res.ec != std::errc()) throw Error(ErrorCode::ParseError, where + ": not a number: '" + s + "'");
  return v;
}

/// Per-sample CSV: subject_id,block_id,label,t,eeg_uv[,delta,...,meditation].
/// Rows of one block must be contiguous; the rate comes from the time column.
inline std::vector<EegRecord> read_csv_dataset(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 5 || header[0] != "subject_id" || header[1] != "block_id" || header[2] != "label" ||
      header[3] != "t" || header[4] != "eeg_uv")
    throw Error(ErrorCode::ParseError, path + ": expected header subject_id,block_id,label,t,eeg_uv[,aux...]");
  const bool has_aux = header.size() >= 5 + kAuxChannelCount;
  std::vector<EegRecord> out;
  std::vector<std::vector<double>> times;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() < header.size()) throw Error(ErrorCode::ParseError, where + ": too few columns");
    if (out.empty() || out.back().block_id != f[1] || out.back().subject_id != f[0]) {
      EegRecord r;
      r.subject_id = f[0];
      r.block_id = f[1];
      r.label = f[2].empty() || f[2] == "null" ? Label::Unlabeled
                                               : (parse_double(f[2], where) == 0 ? Label::Attentive : Label::NonAttentive);
      if (has_aux) {
        r.aux = AuxSeries{};
        r.aux->synthetic = false;
      }
      out.push_back(std::move(r));
      times.emplace_back();
    }
    auto& r = out.back();
    times.back().push_back(parse_double(f[3], where));
    r.samples.push_back(parse_double(f[4], where));
    if (has_aux)
      for (std::size_t c = 0; c < kAuxChannelCount; ++c) r.aux->channels[c].push_back(parse_double(f[5 + c], where));
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto& t = times[b];
    if (t.size() >= 2 && t.back() > t.front()) out[b].sample_rate = static_cast<double>(t.size() - 1) / (t.back() - t.front());
    out[b].sample_rate = std::round(out[b].sample_rate * 1000.0) / 1000.0;
    if (out[b].aux) out[b].aux->rate_hz = out[b].sample_rate;
    out[b].validate();
  }
  return out;
}

inline std::vector<EegRecord> read_dataset(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".csv") return read_csv_dataset(path);
  return read_jsonl_dataset(path);
}

// ---------------------------------------------------------------------------
// Feature matrix CSV: manifest names, then subject_id and label.

inline void write_feature_csv(const std::string& path, const features::FeatureTable& t) {
  auto out = open_out(path);
  for (const auto& n : t.names) out << n << ',';
  out << "subject_id,label\n";
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j)
      out << format_double(t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ',';
    out << t.subjects[i] << ',' << t.labels[i] << '\n';
  }
}

inline features::FeatureTable read_feature_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + ": empty feature file");
  auto header = split_csv(line);
  if (header.size() < 2 || header[header.size() - 2] != "subject_id" || header.back() != "label")
    throw Error(ErrorCode::ParseError, path + ": header must end with subject_id,label");
  features::FeatureTable t;
  t.names.assign(header.begin(), header.end() - 2);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != header.size()) throw Error(ErrorCode::ParseError, where + ": column count mismatch");
    std::vector<double> r(t.names.size());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = parse_double(f[j], where);
    rows.push_back(std::move(r));
    t.subjects.push_back(f[f.size() - 2]);
    t.labels.push_back(static_cast<int>(parse_double(f.back(), where)));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < t.names.size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

// ---------------------------------------------------------------------------
// Preprocessed segments: one JSON object per line.

inline nlohmann::json segment_to_json(const Segment& s) {
  nlohmann::json j = {{"subject_id", s.origin.subject_id},
                      {"block_id", s.origin.block_id},
                      {"start", s.origin.start_index},
                      {"label", is_labeled(s.label) ? nlohmann::json(static_cast<int>(s.label)) : nlohmann::json(nullptr)},
                      {"sample_rate", s.sample_rate},
                      {"samples", s.samples}};
  if (s.aux) {
    nlohmann::json a;
    for (std::size_t c = 0; c < kAuxChannelCount; ++c) a[std::string(kAuxChannelNames[c])] = (*s.aux)[c];
    j["aux"] = a;
  }
  return j;
}

inline Segment segment_from_json(const nlohmann::json& j) {
  Segment s;
  s.origin.subject_id = j.at("subject_id").get<std::string>();
  s.origin.block_id = j.at("block_id").get<std::string>();
  s.origin.start_index = j.at("start").get<std::size_t>();
  const auto& l = j.at("label");
  s.label = l.is_null() ? Label::Unlabeled : (l.get<int>() == 0 ? Label::Attentive : Label::NonAttentive);
  s.sample_rate = j.value("sample_rate", 250.0);
  s.samples = j.at("samples").get<std::vector<double>>();
  if (j.contains("aux") && !j["aux"].is_null()) {
    AuxSnapshot a{};
    for (std::size_t c = 0; c < kAuxChannelCount; ++c) a[c] = j["aux"].at(std::string(kAuxChannelNames[c])).get<double>();
    s.aux = a;
  }
  return s;
}

inline void write_segments(const std::string& path, const std::vector<Segment>& segs) {
  auto out = open_out(path);
  for (const auto& s : segs) out << segment_to_json(s).dump() << '\n';
}

inline std::vector<Segment> read_segments(const std::string& path) {
  auto in = open_in(path);
  std::vector<Segment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(segment_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <class T>
void write_jsonl(const std::string& path, const std::vector<T>& items) {
  auto out = open_out(path);
  for (const auto& it : items) out << to_json(it).dump() << '\n';
}

}  // namespace eegattn::io
