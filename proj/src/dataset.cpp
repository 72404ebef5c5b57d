// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/dataset.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "attnbf/error.h"
#include "attnbf/parallel.h"
#include "attnbf/wav.h"

namespace attnbf {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

std::string utterance_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "utt%05d", index);
  return buf;
}

}  // namespace

json scenario_to_json(const Scenario& sc) {
  json mics = json::array();
  for (const auto& m : sc.array.mic_positions) mics.push_back(vec(m));
  json waypoints = json::array();
  for (const auto& w : sc.trajectory.waypoints) waypoints.push_back(vec(w));
  return {
      {"room", {{"length", sc.room.length}, {"width", sc.room.width}, {"height", sc.room.height}, {"rt60", sc.room.rt60}}},
      {"array", {{"center", vec(sc.array.center)}, {"height", sc.array_height}, {"mics", mics}}},
      {"trajectory",
       {{"template", sc.trajectory_index},
        {"speed", sc.trajectory.speed},
        {"waypoints", waypoints},
        {"timestamps", sc.trajectory.timestamps}}},
      {"source_height", sc.source_height},
  };
}

std::string manifest_line(const ManifestRecord& r) {
  json j = {{"id", r.id},         {"mixture", r.mixture}, {"speech", r.speech},
            {"noise", r.noise},   {"seed", r.seed},       {"snr_db", r.snr_db},
            {"dynamic", r.dynamic}, {"duration_s", r.duration_s}, {"sample_rate", r.sample_rate}};
  if (!r.mask.empty()) j["mask"] = r.mask;
  if (!r.scenario.is_null()) j["scenario"] = r.scenario;
  return j.dump();
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& r : records) out << manifest_line(r) << '\n';
  if (!out) throw IoError("write failed for manifest " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<ManifestRecord> out;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(where + ": " + e.what());
    }
    if (!j.is_object()) throw IoError(where + ": record is not an object");
    ManifestRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.mixture = resolve(base, j.at("mixture").get<std::string>());
      r.speech = resolve(base, j.value("speech", std::string()));
      r.noise = resolve(base, j.value("noise", std::string()));
      r.mask = resolve(base, j.value("mask", std::string()));
      r.seed = j.value("seed", std::uint64_t{0});
      r.snr_db = j.value("snr_db", 0.0);
      r.dynamic = j.value("dynamic", false);
      r.duration_s = j.value("duration_s", 0.0);
      r.sample_rate = j.value("sample_rate", 16000);
      if (j.contains("scenario")) r.scenario = j["scenario"];
    } catch (const json::exception& e) {
      throw IoError(where + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

Utterance load_utterance(const ManifestRecord& record) {
  Utterance u;
  u.id = record.id;
  Wav mix = read_wav(record.mixture);
  u.sample_rate = mix.sample_rate;
  u.mixture = std::move(mix.channels);
  if (!record.speech.empty()) {
    Wav speech = read_wav(record.speech);
    if (speech.channels.size() != u.mixture.size() || speech.channels[0].size() != u.mixture[0].size())
      throw InvalidInput("utterance " + record.id + ": speech and mixture shapes differ");
    u.speech = std::move(speech.channels);
  }
  u.mask_path = record.mask;
  return u;
}

std::vector<ManifestRecord> simulate_dataset(const std::string& out_dir, int count, bool dynamic,
                                             std::uint64_t master_seed, const SimulatorConfig& cfg) {
  if (count < 0) throw InvalidInput("simulate_dataset: negative count");
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  std::vector<ManifestRecord> records(static_cast<std::size_t>(count));
  parallel_for(records.size(), [&](std::size_t i) {
    const std::uint64_t seed = master_seed ^ static_cast<std::uint64_t>(i);
    const auto utt = simulate_utterance(seed, dynamic, cfg);
    ManifestRecord r;
    r.id = utterance_id(static_cast<int>(i));
    r.mixture = r.id + "_mix.wav";
    r.speech = r.id + "_speech.wav";
    r.noise = r.id + "_noise.wav";
    r.seed = seed;
    r.snr_db = utt.scenario.snr_db;
    r.dynamic = dynamic;
    r.duration_s = utt.scenario.duration_s;
    r.sample_rate = cfg.sample_rate;
    r.scenario = scenario_to_json(utt.scenario);
    const fs::path dir(out_dir);
    write_wav((dir / r.mixture).string(), {cfg.sample_rate, utt.mixture});
    write_wav((dir / r.speech).string(), {cfg.sample_rate, utt.speech});
    write_wav((dir / r.noise).string(), {cfg.sample_rate, utt.noise});
    records[i] = std::move(r);
  });
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);
  for (auto& r : records) {
    r.mixture = resolve(out_dir, r.mixture);
    r.speech = resolve(out_dir, r.speech);
    r.noise = resolve(out_dir, r.noise);
  }
  return records;
}

}  // namespace attnbf
