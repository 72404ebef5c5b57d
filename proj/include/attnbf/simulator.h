// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Synthetic shoebox scenes: room and array sampling, source trajectories,
// image-source room impulse responses, moving-source rendering, spherically
// diffuse noise and SNR mixing.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnbf/stft.h"

namespace attnbf {

class ConfigBinder;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

struct RoomSpec {
  double length = 6.0;
  double width = 5.0;
  double height = 3.5;
  double rt60 = 0.4;

  double volume() const { return length * width * height; }
  double surface() const { return 2.0 * (length * width + length * height + width * height); }
  bool contains(const Vec3& p, double clearance = 0.0) const;
};

struct ArraySpec {
  Vec3 center;
  std::vector<Vec3> mic_positions;

  int num_mics() const { return static_cast<int>(mic_positions.size()); }
};

// Offsets (x, y) in metres of the five microphones relative to the array
// centre: a 10 cm x 19 cm rectangle, three mics along one long edge, two on the
// other. All mics share the array height.
const std::vector<Vec3>& array_geometry();

ArraySpec place_array(const Vec3& center);

// Piecewise-linear path traversed at constant speed. After the last waypoint
// the source turns around and walks the path backwards (ping-pong), so the
// position is defined for any time. A single waypoint means a static source.
struct Trajectory {
  std::vector<Vec3> waypoints;
  double speed = 0.0;
  // Arrival time at each waypoint on the first forward pass.
  std::vector<double> timestamps;

  bool is_static() const { return waypoints.size() <= 1; }
  double path_length() const;
  Vec3 position_at(double t) const;
};

struct Scenario {
  RoomSpec room;
  ArraySpec array;
  Trajectory trajectory;
  double source_height = 1.75;
  double array_height = 1.25;
  double snr_db = 5.0;
  double duration_s = 5.0;
  int trajectory_index = 0;
  bool dynamic = true;
  std::uint64_t seed = 0;
};

// How wall absorption is derived from rt60. kSabine inverts Sabine's formula.
// kCalibrated picks the coefficient whose image-source energy decay (direction
// averaged, over the RIR length) has the requested reverberation time; in
// shoebox rooms the image field decays more slowly than Sabine predicts, so
// Sabine absorption overshoots rt60 by 10-50%.
enum class AbsorptionModel { kSabine, kCalibrated };

struct SimulatorConfig {
  double room_length_min = 4.0, room_length_max = 8.0;
  double room_width_min = 4.0, room_width_max = 8.0;
  double room_height_min = 3.0, room_height_max = 4.0;
  double rt60_min = 0.3, rt60_max = 0.6;
  double array_height_min = 1.0, array_height_max = 1.5;
  double source_height_min = 1.5, source_height_max = 2.0;
  double speed_min = 1.0, speed_max = 1.5;
  double snr_min = 0.0, snr_max = 10.0;
  double duration_min = 1.0, duration_max = 15.0;
  double clearance = 0.5;
  double min_source_distance = 0.2;

  int num_trajectories = 50;
  int waypoints_per_trajectory = 8;
  std::uint64_t trajectory_seed = 2024;

  int sample_rate = 16000;
  double sound_speed = 343.0;
  int max_order_cap = 20;
  // RIR length as a multiple of rt60.
  double rir_length_factor = 1.2;
  // Images arriving more than this many ms after the direct path are placed at
  // the nearest sample instead of through the windowed sinc. Negative means
  // every image uses the sinc.
  double sinc_window_ms = 50.0;
  int sinc_taps = 32;
  AbsorptionModel absorption = AbsorptionModel::kCalibrated;
  // Control points per second of audio for moving sources.
  double control_rate = 4.0;

  int plane_waves = 256;
  double sensor_noise_db = -30.0;

  // Optional file-based sources. speech_list names a text file with one mono
  // WAV path per line; noise_file is a WAV with at least as many channels as
  // the array.
  std::string speech_list;
  std::string noise_file;

  void validate() const;
  void bind(ConfigBinder& binder, const std::string& section = "simulator");
};

struct IsmOptions {
  int sample_rate = 16000;
  double sound_speed = 343.0;
  // Reflection order per dimension; negative picks it from the RIR length.
  int max_order = -1;
  int max_order_cap = 20;
  double rir_length_factor = 1.2;
  double sinc_window_ms = 50.0;
  int sinc_taps = 32;
  AbsorptionModel absorption = AbsorptionModel::kCalibrated;

  static IsmOptions from(const SimulatorConfig& cfg);
};

// Wall absorption coefficient giving `rt60` by Sabine's formula. Throws
// ConfigError if the room cannot be that dry (coefficient above one).
double sabine_absorption(const RoomSpec& room, double rt60, double sound_speed = 343.0);

// Absorption for AbsorptionModel::kCalibrated; horizon_s is the RIR length in
// seconds. Throws ConfigError when even full absorption decays too slowly.
double calibrated_absorption(const RoomSpec& room, double rt60, double sound_speed, double horizon_s);

// Reverberation time of the modelled image-source decay for a given absorption.
double ism_decay_rt60(const RoomSpec& room, double alpha, double sound_speed, double horizon_s);

std::size_t rir_length(const RoomSpec& room, const IsmOptions& opts);

// Shoebox image-source RIR between src and mic, in pressure per unit source
// (the direct path has amplitude 1 / (4 pi d) at delay d / c).
std::vector<double> ism_rir(const RoomSpec& room, const Vec3& src, const Vec3& mic, const IsmOptions& opts);

// Energy decay curve in dB (Schroeder backward integration, 0 dB at t = 0).
std::vector<double> schroeder_curve(const std::vector<double>& rir);

// Reverberation time from a linear fit to the decay curve between -5 and
// -35 dB, extrapolated to -60 dB.
double estimate_rt60(const std::vector<double>& rir, int sample_rate);

// Image of the dry signal at every microphone. Static sources use one RIR set;
// moving sources use K = max(2, ceil(duration * control_rate)) control points
// with triangular crossfades on the source signal.
MultiSignal render_moving_source(const Signal& dry, const Scenario& scenario, const SimulatorConfig& cfg);

// Spherically isotropic noise from random plane waves plus white sensor noise
// (sensor_noise_db relative to the diffuse field power).
MultiSignal diffuse_noise(std::size_t num_samples, const ArraySpec& array, std::uint64_t seed,
                          const SimulatorConfig& cfg);

// Gain g such that 10 log10(|speech_ref|^2 / |g noise_ref|^2) = snr_db.
double snr_gain(const MultiSignal& speech, const MultiSignal& noise, double snr_db, int ref);

// speech + g * noise with g from snr_gain.
MultiSignal mix_at_snr(const MultiSignal& speech, const MultiSignal& noise, double snr_db, int ref);

// Speech-like test signal: harmonic complexes with vibrato and syllabic
// amplitude modulation, separated by pauses, with occasional noise bursts.
Signal synthetic_speech(std::size_t num_samples, int sample_rate, std::uint64_t seed);

// Normalized waypoints of trajectory template `index`, each in [0, 1]^2.
std::vector<std::pair<double, double>> trajectory_template(const SimulatorConfig& cfg, int index);

// Draws a scene. The random stream does not depend on `dynamic`, so the static
// and dynamic scenes for one seed share room, array, source start point, SNR
// and duration. Throws GeometryError after 10^4 rejected draws.
Scenario sample_scenario(std::uint64_t seed, bool dynamic, const SimulatorConfig& cfg = {});

struct SimulatedUtterance {
  Scenario scenario;
  Signal dry;
  MultiSignal speech;  // reverberant image at each mic
  MultiSignal noise;   // already scaled to the scenario SNR
  MultiSignal mixture;
};

SimulatedUtterance simulate_utterance(std::uint64_t seed, bool dynamic, const SimulatorConfig& cfg = {});

}  // namespace attnbf
