// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// JSON-lines dataset manifests. One record per utterance:
//
//   {"id": "utt00000", "mixture": "utt00000_mix.wav", "speech": "utt00000_speech.wav",
//    "noise": "utt00000_noise.wav", "seed": 7, "snr_db": 4.2, "dynamic": true,
//    "duration_s": 3.1, "sample_rate": 16000, "scenario": {...}}
//
// Relative paths resolve against the manifest's directory. Only "id" and
// "mixture" are required; "speech" (reverberant multichannel image) enables
// oracle masks and metrics, "mask" names a grid file with a precomputed mask.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnbf/simulator.h"
#include "attnbf/stft.h"

namespace attnbf {

struct ManifestRecord {
  std::string id;
  std::string mixture;
  std::string speech;
  std::string noise;
  std::string mask;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  bool dynamic = false;
  double duration_s = 0.0;
  int sample_rate = 16000;
  nlohmann::json scenario;  // null when unknown
};

nlohmann::json scenario_to_json(const Scenario& scenario);

// Throws IoError for unreadable files and malformed lines (with line numbers).
std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);
std::string manifest_line(const ManifestRecord& record);

struct Utterance {
  std::string id;
  int sample_rate = 16000;
  MultiSignal mixture;
  MultiSignal speech;  // empty when the manifest has no reference
  std::string mask_path;
};

Utterance load_utterance(const ManifestRecord& record);

// Renders `count` scenes with seeds master_seed XOR i into out_dir (WAVs as
// float32) and writes out_dir/manifest.jsonl. Utterances are generated in
// parallel; the manifest order is the index order.
std::vector<ManifestRecord> simulate_dataset(const std::string& out_dir, int count, bool dynamic,
                                             std::uint64_t master_seed, const SimulatorConfig& cfg);

}  // namespace attnbf
