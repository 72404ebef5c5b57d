// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/simulator.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "attnbf/config.h"
#include "attnbf/error.h"
#include "attnbf/fft.h"
#include "attnbf/wav.h"

namespace attnbf {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxRejections = 10000;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const double abx = b.x - a.x, aby = b.y - a.y, abz = b.z - a.z;
  const double len2 = abx * abx + aby * aby + abz * abz;
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(((p.x - a.x) * abx + (p.y - a.y) * aby + (p.z - a.z) * abz) / len2, 0.0, 1.0);
  return distance(p, {a.x + u * abx, a.y + u * aby, a.z + u * abz});
}

void check_range(double lo, double hi, const char* name) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError(std::string("simulator range ") + name + " is empty");
}

// Adds amp * windowed-sinc(n - delay) to out. With base = round(D) and
// frac = D - base, sin(pi (n - D)) = -(-1)^(n - base) sin(pi frac); taking the
// fractional part around the nearest integer keeps small offsets accurate and
// makes integer delays produce exactly one nonzero tap.
void add_fractional_tap(std::vector<double>& out, double delay, double amp, int taps) {
  const double nearest = std::round(delay);
  const double frac = delay - nearest;
  const long base = static_cast<long>(nearest);
  const double half = taps / 2.0;
  const double s = std::sin(kPi * frac);
  for (long n = base - taps / 2; n <= base + taps / 2; ++n) {
    if (n < 0 || n >= static_cast<long>(out.size())) continue;
    const double x = static_cast<double>(n) - delay;
    if (std::abs(x) >= half) continue;
    double sinc;
    if (frac == 0.0) {
      sinc = (n == base) ? 1.0 : 0.0;
    } else {
      const double sign = ((n - base) % 2 == 0) ? -1.0 : 1.0;
      sinc = sign * s / (kPi * x);
    }
    if (sinc == 0.0) continue;
    out[static_cast<std::size_t>(n)] += amp * 0.5 * (1.0 + std::cos(kPi * x / half)) * sinc;
  }
}

struct AxisImage {
  double offset;  // image coordinate minus mic coordinate
  int reflections;
};

// Images (1 - 2q) src + 2 m len for |m| <= order. Order 0 keeps only the
// source itself, so a zero order gives the free-field response.
std::vector<AxisImage> axis_images(double src, double mic, double len, int order) {
  std::vector<AxisImage> out;
  out.reserve(static_cast<std::size_t>(2 * (2 * order + 1)));
  for (int m = -order; m <= order; ++m)
    for (int q = 0; q <= (order > 0 ? 1 : 0); ++q) {
      const double img = (q ? -src : src) + 2.0 * m * len;
      out.push_back({img - mic, std::abs(m - q) + std::abs(m)});
    }
  return out;
}

Signal load_file_speech(const SimulatorConfig& cfg, std::mt19937_64& rng, std::size_t n) {
  std::ifstream in(cfg.speech_list);
  if (!in) throw IoError("cannot open speech list " + cfg.speech_list);
  std::vector<std::string> paths;
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line[0] != '#') paths.push_back(line);
  }
  if (paths.empty()) throw IoError("speech list " + cfg.speech_list + " is empty");
  const auto pick = std::uniform_int_distribution<std::size_t>(0, paths.size() - 1)(rng);
  Wav wav = read_wav(paths[pick]);
  if (wav.sample_rate != cfg.sample_rate)
    throw InvalidInput("speech file " + paths[pick] + " has sample rate " + std::to_string(wav.sample_rate));
  const Signal& src = wav.channels.at(0);
  if (src.empty()) throw InvalidInput("speech file " + paths[pick] + " is empty");
  Signal out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = src[i % src.size()];
  return out;
}

MultiSignal load_file_noise(const SimulatorConfig& cfg, std::mt19937_64& rng, std::size_t n, int mics) {
  Wav wav = read_wav(cfg.noise_file);
  if (static_cast<int>(wav.channels.size()) < mics)
    throw InvalidInput("noise file " + cfg.noise_file + " has fewer channels than the array");
  if (wav.sample_rate != cfg.sample_rate) throw InvalidInput("noise file sample rate differs from the simulator");
  const std::size_t len = wav.channels[0].size();
  if (len == 0) throw InvalidInput("noise file is empty");
  const std::size_t start = len > n ? std::uniform_int_distribution<std::size_t>(0, len - n)(rng) : 0;
  MultiSignal out(static_cast<std::size_t>(mics), Signal(n));
  for (int m = 0; m < mics; ++m)
    for (std::size_t i = 0; i < n; ++i) out[m][i] = wav.channels[m][(start + i) % len];
  return out;
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

bool RoomSpec::contains(const Vec3& p, double clearance) const {
  return p.x >= clearance && p.x <= length - clearance && p.y >= clearance && p.y <= width - clearance &&
         p.z >= clearance && p.z <= height - clearance;
}

const std::vector<Vec3>& array_geometry() {
  static const std::vector<Vec3> geometry = {
      {-0.05, 0.095, 0.0}, {0.05, 0.095, 0.0}, {-0.05, -0.095, 0.0}, {0.0, -0.095, 0.0}, {0.05, -0.095, 0.0}};
  return geometry;
}

ArraySpec place_array(const Vec3& center) {
  ArraySpec array;
  array.center = center;
  for (const Vec3& o : array_geometry()) array.mic_positions.push_back({center.x + o.x, center.y + o.y, center.z + o.z});
  return array;
}

double Trajectory::path_length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) total += distance(waypoints[i - 1], waypoints[i]);
  return total;
}

Vec3 Trajectory::position_at(double t) const {
  if (waypoints.empty()) throw InvalidInput("trajectory has no waypoints");
  const double total = path_length();
  if (is_static() || total <= 0.0 || speed <= 0.0) return waypoints.front();
  double s = std::fmod(std::max(t, 0.0) * speed, 2.0 * total);
  if (s > total) s = 2.0 * total - s;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double seg = distance(waypoints[i - 1], waypoints[i]);
    if (s <= seg || i + 1 == waypoints.size()) {
      const double u = seg > 0.0 ? std::clamp(s / seg, 0.0, 1.0) : 0.0;
      const Vec3& a = waypoints[i - 1];
      const Vec3& b = waypoints[i];
      return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.z + u * (b.z - a.z)};
    }
    s -= seg;
  }
  return waypoints.back();
}

void SimulatorConfig::validate() const {
  check_range(room_length_min, room_length_max, "room_length");
  check_range(room_width_min, room_width_max, "room_width");
  check_range(room_height_min, room_height_max, "room_height");
  check_range(rt60_min, rt60_max, "rt60");
  check_range(array_height_min, array_height_max, "array_height");
  check_range(source_height_min, source_height_max, "source_height");
  check_range(speed_min, speed_max, "speed");
  check_range(snr_min, snr_max, "snr");
  check_range(duration_min, duration_max, "duration");
  if (rt60_min <= 0.0) throw ConfigError("rt60 must be positive");
  if (duration_min <= 0.0) throw ConfigError("duration must be positive");
  if (speed_min < 0.0) throw ConfigError("speed must be non-negative");
  if (room_length_min <= 2.0 * clearance + 0.1 || room_width_min <= 2.0 * clearance + 0.19)
    throw ConfigError("room too small for the clearance");
  if (num_trajectories < 1) throw ConfigError("num_trajectories must be at least 1");
  if (waypoints_per_trajectory < 1) throw ConfigError("waypoints_per_trajectory must be at least 1");
  if (sample_rate <= 0 || sound_speed <= 0.0) throw ConfigError("sample_rate and sound_speed must be positive");
  if (max_order_cap < 0) throw ConfigError("max_order_cap must be non-negative");
  if (rir_length_factor <= 0.0) throw ConfigError("rir_length_factor must be positive");
  if (sinc_taps < 2 || sinc_taps % 2 != 0) throw ConfigError("sinc_taps must be even and at least 2");
  if (control_rate <= 0.0) throw ConfigError("control_rate must be positive");
  if (plane_waves < 1) throw ConfigError("plane_waves must be at least 1");
}

void SimulatorConfig::bind(ConfigBinder& b, const std::string& s) {
  b.bind(s, "room_length_min", room_length_min);
  b.bind(s, "room_length_max", room_length_max);
  b.bind(s, "room_width_min", room_width_min);
  b.bind(s, "room_width_max", room_width_max);
  b.bind(s, "room_height_min", room_height_min);
  b.bind(s, "room_height_max", room_height_max);
  b.bind(s, "rt60_min", rt60_min);
  b.bind(s, "rt60_max", rt60_max);
  b.bind(s, "array_height_min", array_height_min);
  b.bind(s, "array_height_max", array_height_max);
  b.bind(s, "source_height_min", source_height_min);
  b.bind(s, "source_height_max", source_height_max);
  b.bind(s, "speed_min", speed_min);
  b.bind(s, "speed_max", speed_max);
  b.bind(s, "snr_min", snr_min);
  b.bind(s, "snr_max", snr_max);
  b.bind(s, "duration_min", duration_min);
  b.bind(s, "duration_max", duration_max);
  b.bind(s, "clearance", clearance);
  b.bind(s, "min_source_distance", min_source_distance);
  b.bind(s, "num_trajectories", num_trajectories);
  b.bind(s, "waypoints_per_trajectory", waypoints_per_trajectory);
  b.bind(s, "trajectory_seed", trajectory_seed);
  b.bind(s, "sample_rate", sample_rate);
  b.bind(s, "sound_speed", sound_speed);
  b.bind(s, "max_order_cap", max_order_cap);
  b.bind(s, "rir_length_factor", rir_length_factor);
  b.bind(s, "sinc_window_ms", sinc_window_ms);
  b.bind(s, "sinc_taps", sinc_taps);
  b.bind(s, "control_rate", control_rate);
  b.bind_with(
      s, "absorption",
      [this](const std::string& v) {
        if (v == "sabine") absorption = AbsorptionModel::kSabine;
        else if (v == "calibrated") absorption = AbsorptionModel::kCalibrated;
        else throw ConfigError("absorption must be sabine or calibrated, got '" + v + "'");
      },
      [this] { return std::string(absorption == AbsorptionModel::kSabine ? "sabine" : "calibrated"); });
  b.bind(s, "plane_waves", plane_waves);
  b.bind(s, "sensor_noise_db", sensor_noise_db);
  b.bind(s, "speech_list", speech_list);
  b.bind(s, "noise_file", noise_file);
}

IsmOptions IsmOptions::from(const SimulatorConfig& cfg) {
  IsmOptions o;
  o.sample_rate = cfg.sample_rate;
  o.sound_speed = cfg.sound_speed;
  o.max_order_cap = cfg.max_order_cap;
  o.rir_length_factor = cfg.rir_length_factor;
  o.sinc_window_ms = cfg.sinc_window_ms;
  o.sinc_taps = cfg.sinc_taps;
  o.absorption = cfg.absorption;
  return o;
}

double sabine_absorption(const RoomSpec& room, double rt60, double sound_speed) {
  if (!(rt60 > 0.0)) throw ConfigError("rt60 must be positive");
  // RT60 = 24 ln(10) V / (c S alpha)
  const double alpha = 24.0 * std::log(10.0) * room.volume() / (sound_speed * room.surface() * rt60);
  if (alpha > 1.0) throw ConfigError("rt60 is too short for this room (absorption above 1)");
  return alpha;
}

double ism_decay_rt60(const RoomSpec& room, double alpha, double sound_speed, double horizon_s) {
  // An image at distance r = c t in direction u has undergone
  // r (|ux| / L + |uy| / W + |uz| / H) reflections; image density grows as r^2
  // and cancels the spherical spreading, so the squared RIR follows the
  // direction average of (1 - alpha)^reflections.
  constexpr int kPolar = 16, kAzimuth = 16, kTimes = 120;
  const double log_r = std::log1p(-std::min(alpha, 1.0 - 1e-15));
  std::vector<double> rate;
  for (int i = 0; i < kPolar; ++i) {
    const double uz = (i + 0.5) / kPolar;  // uniform in cos(theta) over the upper hemisphere
    const double r = std::sqrt(1.0 - uz * uz);
    for (int j = 0; j < kAzimuth; ++j) {
      const double phi = (j + 0.5) / kAzimuth * (kPi / 2.0);
      rate.push_back(sound_speed * (r * std::cos(phi) / room.length + r * std::sin(phi) / room.width + uz / room.height));
    }
  }
  const double dt = horizon_s / kTimes;
  std::vector<double> energy(kTimes);
  for (int k = 0; k < kTimes; ++k) {
    const double t = (k + 0.5) * dt;
    double acc = 0.0;
    for (double r : rate) acc += std::exp(log_r * r * t);
    energy[k] = std::sqrt(acc);  // estimate_rt60 expects amplitudes
  }
  // Decays too fast or too slow for the fit window map to 0 and infinity so
  // the bisection in calibrated_absorption stays well defined.
  const auto edc = schroeder_curve(energy);
  if (edc[1] <= -35.0) return 0.0;
  if (edc.back() > -35.0) return std::numeric_limits<double>::infinity();
  return estimate_rt60(energy, static_cast<int>(std::lround(1.0 / dt)));
}

double calibrated_absorption(const RoomSpec& room, double rt60, double sound_speed, double horizon_s) {
  if (!(rt60 > 0.0)) throw ConfigError("rt60 must be positive");
  thread_local struct {
    double key[6] = {};
    double alpha = -1.0;
  } cache;
  const double key[6] = {room.length, room.width, room.height, rt60, sound_speed, horizon_s};
  if (cache.alpha >= 0.0 && std::equal(key, key + 6, cache.key)) return cache.alpha;

  // The modelled decay time falls monotonically with alpha.
  double lo = 1e-6, hi = 1.0 - 1e-9;
  if (ism_decay_rt60(room, hi, sound_speed, horizon_s) > rt60)
    throw ConfigError("rt60 is too short for this room (absorption above 1)");
  for (int it = 0; it < 32; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ism_decay_rt60(room, mid, sound_speed, horizon_s) > rt60) lo = mid;
    else hi = mid;
  }
  std::copy(key, key + 6, cache.key);
  cache.alpha = 0.5 * (lo + hi);
  return cache.alpha;
}

std::size_t rir_length(const RoomSpec& room, const IsmOptions& opts) {
  return static_cast<std::size_t>(std::ceil(opts.rir_length_factor * room.rt60 * opts.sample_rate));
}

std::vector<double> ism_rir(const RoomSpec& room, const Vec3& src, const Vec3& mic, const IsmOptions& opts) {
  if (!room.contains(src) || !room.contains(mic)) throw InvalidInput("ism_rir: source or mic outside the room");
  const std::size_t len = rir_length(room, opts);
  const double alpha = opts.absorption == AbsorptionModel::kSabine
                           ? sabine_absorption(room, room.rt60, opts.sound_speed)
                           : calibrated_absorption(room, room.rt60, opts.sound_speed,
                                                   static_cast<double>(len) / opts.sample_rate);
  const double beta = std::sqrt(1.0 - alpha);
  std::vector<double> out(len, 0.0), late(len, 0.0);
  const double fs = opts.sample_rate;
  const double c = opts.sound_speed;
  const double reach = c * (static_cast<double>(len) + opts.sinc_taps) / fs;

  auto order_for = [&](double dim) {
    if (opts.max_order >= 0) return opts.max_order;
    return std::min(opts.max_order_cap, static_cast<int>(std::ceil(reach / (2.0 * dim))) + 1);
  };
  const auto xs = axis_images(src.x, mic.x, room.length, order_for(room.length));
  const auto ys = axis_images(src.y, mic.y, room.width, order_for(room.width));
  const auto zs = axis_images(src.z, mic.z, room.height, order_for(room.height));

  std::vector<double> beta_pow(static_cast<std::size_t>(4 * (order_for(room.length) + order_for(room.width) +
                                                             order_for(room.height)) + 8));
  beta_pow[0] = 1.0;
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  const double direct = distance(src, mic) / c * fs;
  const double sinc_limit =
      opts.sinc_window_ms < 0.0 ? std::numeric_limits<double>::infinity() : direct + opts.sinc_window_ms * fs / 1000.0;
  const double reach2 = reach * reach;

  for (const auto& ix : xs) {
    const double dx2 = ix.offset * ix.offset;
    if (dx2 > reach2) continue;
    for (const auto& iy : ys) {
      const double dxy2 = dx2 + iy.offset * iy.offset;
      if (dxy2 > reach2) continue;
      for (const auto& iz : zs) {
        const double d2 = dxy2 + iz.offset * iz.offset;
        if (d2 > reach2) continue;
        const double d = std::sqrt(d2);
        const double amp = beta_pow[static_cast<std::size_t>(ix.reflections + iy.reflections + iz.reflections)] /
                           (4.0 * kPi * d);
        const double delay = d / c * fs;
        if (delay <= sinc_limit) {
          add_fractional_tap(out, delay, amp, opts.sinc_taps);
        } else {
          const auto idx = static_cast<std::size_t>(std::lround(delay));
          if (idx < len) late[idx] += amp;
        }
      }
    }
  }
  // All image amplitudes are positive, so once several images share a sample
  // the tail acquires a slowly varying mean that carries spurious energy and
  // stretches the decay. Subtracting a 10 ms moving average removes it (a
  // gentle high-pass on the late part only).
  const auto half = static_cast<std::size_t>(opts.sample_rate / 200);
  std::vector<double> prefix(len + 1, 0.0);
  for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + late[i];
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(len, i + half + 1);
    if (prefix[hi] == prefix[lo]) continue;
    out[i] += late[i] - (prefix[hi] - prefix[lo]) / static_cast<double>(2 * half + 1);
  }
  return out;
}

std::vector<double> schroeder_curve(const std::vector<double>& rir) {
  std::vector<double> edc(rir.size());
  double acc = 0.0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  if (rir.empty() || acc <= 0.0) throw InvalidInput("schroeder_curve: RIR has no energy");
  for (double& e : edc) e = e > 0.0 ? 10.0 * std::log10(e / acc) : -std::numeric_limits<double>::infinity();
  return edc;
}

double estimate_rt60(const std::vector<double>& rir, int sample_rate) {
  const auto edc = schroeder_curve(rir);
  std::size_t begin = edc.size(), end = edc.size();
  for (std::size_t i = 0; i < edc.size(); ++i) {
    if (begin == edc.size() && edc[i] <= -5.0) begin = i;
    if (edc[i] <= -35.0) {
      end = i;
      break;
    }
  }
  if (begin >= end || end == edc.size()) throw NumericalError("decay curve does not reach -35 dB");
  // least-squares line through (i, edc[i]) on [begin, end]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(end - begin + 1);
  for (std::size_t i = begin; i <= end; ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += edc[i];
    sxx += x * x;
    sxy += x * edc[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope < 0.0)) throw NumericalError("decay curve is not decreasing");
  return -60.0 / slope / sample_rate;
}

MultiSignal render_moving_source(const Signal& dry, const Scenario& scenario, const SimulatorConfig& cfg) {
  const auto opts = IsmOptions::from(cfg);
  const auto& mics = scenario.array.mic_positions;
  const std::size_t n = dry.size();
  MultiSignal out(mics.size(), Signal(n, 0.0));
  if (n == 0) return out;

  auto add_block = [&](const Vec3& pos, std::size_t start, const Signal& seg) {
    for (std::size_t m = 0; m < mics.size(); ++m) {
      const auto rir = ism_rir(scenario.room, pos, mics[m], opts);
      const auto wet = fft_convolve(seg, rir);
      const std::size_t count = std::min(wet.size(), n - start);
      for (std::size_t i = 0; i < count; ++i) out[m][start + i] += wet[i];
    }
  };

  if (scenario.trajectory.is_static() || n < 2) {
    add_block(scenario.trajectory.position_at(0.0), 0, dry);
    return out;
  }

  const double duration = static_cast<double>(n) / cfg.sample_rate;
  const int k_points = std::max(2, static_cast<int>(std::ceil(duration * cfg.control_rate)));
  const double spacing = static_cast<double>(n - 1) / (k_points - 1);
  for (int k = 0; k < k_points; ++k) {
    const double center = k * spacing;
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(center - spacing)));
    const auto hi = std::min(n - 1, static_cast<std::size_t>(std::floor(center + spacing)));
    Signal seg(hi - lo + 1);
    bool any = false;
    for (std::size_t i = lo; i <= hi; ++i) {
      const double w = std::max(0.0, 1.0 - std::abs(static_cast<double>(i) - center) / spacing);
      seg[i - lo] = dry[i] * w;
      any = any || seg[i - lo] != 0.0;
    }
    if (!any) continue;
    add_block(scenario.trajectory.position_at(center / cfg.sample_rate), lo, seg);
  }
  return out;
}

MultiSignal diffuse_noise(std::size_t num_samples, const ArraySpec& array, std::uint64_t seed,
                          const SimulatorConfig& cfg) {
  const int mics = array.num_mics();
  MultiSignal out(static_cast<std::size_t>(mics), Signal(num_samples, 0.0));
  if (num_samples == 0 || mics == 0) return out;

  int len = fft_friendly_size(static_cast<int>(std::max<std::size_t>(num_samples, 2)));
  if (len % 2) len = fft_friendly_size(len + 1);
  RealFft fft(len);
  const int bins = fft.num_bins();
  std::vector<std::vector<cplx>> spec(static_cast<std::size_t>(mics), std::vector<cplx>(static_cast<std::size_t>(bins)));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<cplx> source(static_cast<std::size_t>(bins));
  for (int p = 0; p < cfg.plane_waves; ++p) {
    const double uz = uniform(rng, -1.0, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - uz * uz));
    const double ux = r * std::cos(phi), uy = r * std::sin(phi);
    for (auto& s : source) {
      const double re = normal(rng);
      const double im = normal(rng);
      s = {re, im};
    }
    for (int m = 0; m < mics; ++m) {
      const Vec3& q = array.mic_positions[m];
      const double rx = q.x - array.center.x, ry = q.y - array.center.y, rz = q.z - array.center.z;
      // arrival delay relative to the array centre for a wave travelling along -u
      const double tau = -(ux * rx + uy * ry + uz * rz) / cfg.sound_speed;
      const double dphi = -2.0 * kPi * tau * cfg.sample_rate / len;
      auto& dst = spec[m];
      const cplx inc = std::polar(1.0, dphi);
      cplx rot = 1.0;
      for (int k = 0; k < bins; ++k) {
        if (k % 1024 == 0) rot = std::polar(1.0, dphi * k);
        dst[k] += source[k] * rot;
        rot *= inc;
      }
    }
  }

  Signal buf(static_cast<std::size_t>(len));
  double power = 0.0;
  for (int m = 0; m < mics; ++m) {
    spec[m][0].imag(0.0);
    spec[m][bins - 1].imag(0.0);
    fft.inverse(spec[m], buf);
    std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(num_samples), out[m].begin());
    for (double v : out[m]) power += v * v;
  }
  power /= static_cast<double>(mics) * num_samples;
  const double scale = power > 0.0 ? 1.0 / std::sqrt(power) : 0.0;
  const double sensor = std::sqrt(std::pow(10.0, cfg.sensor_noise_db / 10.0));
  for (auto& ch : out)
    for (double& v : ch) v = v * scale + sensor * normal(rng);
  return out;
}

double snr_gain(const MultiSignal& speech, const MultiSignal& noise, double snr_db, int ref) {
  if (speech.size() != noise.size()) throw InvalidInput("mix_at_snr: channel counts differ");
  if (ref < 0 || ref >= static_cast<int>(speech.size())) throw InvalidInput("mix_at_snr: reference out of range");
  for (std::size_t m = 0; m < speech.size(); ++m)
    if (speech[m].size() != noise[m].size()) throw InvalidInput("mix_at_snr: lengths differ");
  double es = 0.0, en = 0.0;
  for (double v : speech[ref]) es += v * v;
  for (double v : noise[ref]) en += v * v;
  if (es <= 0.0) throw InvalidInput("mix_at_snr: speech has zero energy");
  if (en <= 0.0) throw InvalidInput("mix_at_snr: noise has zero energy");
  return std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
}

MultiSignal mix_at_snr(const MultiSignal& speech, const MultiSignal& noise, double snr_db, int ref) {
  const double g = snr_gain(speech, noise, snr_db, ref);
  MultiSignal out = speech;
  for (std::size_t m = 0; m < out.size(); ++m)
    for (std::size_t i = 0; i < out[m].size(); ++i) out[m][i] += g * noise[m][i];
  return out;
}

Signal synthetic_speech(std::size_t num_samples, int sample_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Signal out(num_samples, 0.0);
  const double fs = sample_rate;
  const double top = std::min(4000.0, 0.45 * fs);

  std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.02, 0.15) * fs);
  while (pos < num_samples) {
    const auto len = static_cast<std::size_t>(uniform(rng, 0.15, 0.45) * fs);
    const std::size_t end = std::min(num_samples, pos + len);
    const bool burst = uniform(rng, 0.0, 1.0) < 0.12;
    const double level = uniform(rng, 0.5, 1.0);
    if (burst) {
      double prev = 0.0;
      for (std::size_t i = pos; i < end; ++i) {
        const double u = static_cast<double>(i - pos) / len;
        const double white = normal(rng);
        // first difference tilts the burst towards high frequencies
        out[i] = 0.3 * level * (white - prev) * std::sin(kPi * u);
        prev = white;
      }
    } else {
      const double f0 = uniform(rng, 100.0, 250.0);
      const double glide = uniform(rng, -0.2, 0.2);
      const double vib_rate = uniform(rng, 4.0, 6.0);
      const double am_rate = uniform(rng, 3.0, 5.0);
      const double formant = uniform(rng, 400.0, 1200.0);
      double phase = 0.0;
      for (std::size_t i = pos; i < end; ++i) {
        const double t = static_cast<double>(i - pos) / fs;
        const double u = static_cast<double>(i - pos) / len;
        const double f = f0 * (1.0 + glide * u) * (1.0 + 0.03 * std::sin(2.0 * kPi * vib_rate * t));
        phase += 2.0 * kPi * f / fs;
        double acc = 0.0;
        const int harmonics = static_cast<int>(top / f);
        for (int k = 1; k <= harmonics; ++k) {
          const double fk = k * f;
          const double shape = 1.0 + 2.0 * std::exp(-0.5 * std::pow((fk - formant) / 200.0, 2));
          acc += shape * std::sin(k * phase) / k;
        }
        const double envelope = std::sin(kPi * u) * (0.6 + 0.4 * std::sin(2.0 * kPi * am_rate * t));
        out[i] = 0.25 * level * envelope * acc;
      }
    }
    pos = end + static_cast<std::size_t>(uniform(rng, 0.05, 0.3) * fs);
  }
  return out;
}

std::vector<std::pair<double, double>> trajectory_template(const SimulatorConfig& cfg, int index) {
  if (index < 0 || index >= cfg.num_trajectories) throw InvalidInput("trajectory template index out of range");
  std::mt19937_64 rng(cfg.trajectory_seed ^ static_cast<std::uint64_t>(index));
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < cfg.waypoints_per_trajectory; ++i) pts.emplace_back(uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0));
  return pts;
}

Scenario sample_scenario(std::uint64_t seed, bool dynamic, const SimulatorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const double half_x = 0.05, half_y = 0.095;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    Scenario sc;
    sc.seed = seed;
    sc.dynamic = dynamic;
    sc.room.length = uniform(rng, cfg.room_length_min, cfg.room_length_max);
    sc.room.width = uniform(rng, cfg.room_width_min, cfg.room_width_max);
    sc.room.height = uniform(rng, cfg.room_height_min, cfg.room_height_max);
    sc.room.rt60 = uniform(rng, cfg.rt60_min, cfg.rt60_max);
    sc.array_height = uniform(rng, cfg.array_height_min, cfg.array_height_max);
    const double cx = uniform(rng, cfg.clearance + half_x, sc.room.length - cfg.clearance - half_x);
    const double cy = uniform(rng, cfg.clearance + half_y, sc.room.width - cfg.clearance - half_y);
    sc.source_height = uniform(rng, cfg.source_height_min, cfg.source_height_max);
    const double speed = uniform(rng, cfg.speed_min, cfg.speed_max);
    sc.snr_db = uniform(rng, cfg.snr_min, cfg.snr_max);
    sc.duration_s = uniform(rng, cfg.duration_min, cfg.duration_max);
    sc.trajectory_index = std::uniform_int_distribution<int>(0, cfg.num_trajectories - 1)(rng);

    sc.array = place_array({cx, cy, sc.array_height});
    bool ok = sc.array_height >= cfg.clearance && sc.array_height <= sc.room.height - cfg.clearance &&
              sc.source_height <= sc.room.height - cfg.clearance;
    try {
      const auto opts = IsmOptions::from(cfg);
      if (cfg.absorption == AbsorptionModel::kSabine) sabine_absorption(sc.room, sc.room.rt60, cfg.sound_speed);
      else if (ism_decay_rt60(sc.room, 1.0 - 1e-9, cfg.sound_speed,
                              static_cast<double>(rir_length(sc.room, opts)) / opts.sample_rate) > sc.room.rt60)
        ok = false;
    } catch (const ConfigError&) {
      ok = false;
    }
    if (!ok) continue;

    std::vector<Vec3> path;
    for (const auto& [u, v] : trajectory_template(cfg, sc.trajectory_index))
      path.push_back({cfg.clearance + u * (sc.room.length - 2.0 * cfg.clearance),
                      cfg.clearance + v * (sc.room.width - 2.0 * cfg.clearance), sc.source_height});
    for (const Vec3& mic : sc.array.mic_positions) {
      if (path.size() == 1) ok = ok && distance(mic, path[0]) >= cfg.min_source_distance;
      for (std::size_t i = 1; i < path.size() && ok; ++i)
        ok = point_segment_distance(mic, path[i - 1], path[i]) >= cfg.min_source_distance;
    }
    if (!ok) continue;

    sc.trajectory.speed = speed;
    if (dynamic) {
      sc.trajectory.waypoints = path;
    } else {
      sc.trajectory.waypoints = {path.front()};
    }
    double t = 0.0;
    sc.trajectory.timestamps.push_back(0.0);
    for (std::size_t i = 1; i < sc.trajectory.waypoints.size(); ++i) {
      t += speed > 0.0 ? distance(sc.trajectory.waypoints[i - 1], sc.trajectory.waypoints[i]) / speed : 0.0;
      sc.trajectory.timestamps.push_back(t);
    }
    return sc;
  }
  throw GeometryError("no valid scenario after 10000 draws");
}

SimulatedUtterance simulate_utterance(std::uint64_t seed, bool dynamic, const SimulatorConfig& cfg) {
  SimulatedUtterance u;
  u.scenario = sample_scenario(seed, dynamic, cfg);
  const auto n = static_cast<std::size_t>(std::llround(u.scenario.duration_s * cfg.sample_rate));
  // Independent streams for the source and noise so they do not depend on how
  // many rejections the geometry needed.
  std::mt19937_64 aux(seed ^ 0x9E3779B97F4A7C15ULL);
  const std::uint64_t speech_seed = aux();
  const std::uint64_t noise_seed = aux();

  if (cfg.speech_list.empty()) {
    u.dry = synthetic_speech(n, cfg.sample_rate, speech_seed);
  } else {
    std::mt19937_64 pick(speech_seed);
    u.dry = load_file_speech(cfg, pick, n);
  }
  u.speech = render_moving_source(u.dry, u.scenario, cfg);
  if (cfg.noise_file.empty()) {
    u.noise = diffuse_noise(n, u.scenario.array, noise_seed, cfg);
  } else {
    std::mt19937_64 pick(noise_seed);
    u.noise = load_file_noise(cfg, pick, n, u.scenario.array.num_mics());
  }
  const double g = snr_gain(u.speech, u.noise, u.scenario.snr_db, 0);
  u.mixture = u.speech;
  for (std::size_t m = 0; m < u.noise.size(); ++m)
    for (std::size_t i = 0; i < n; ++i) {
      u.noise[m][i] *= g;
      u.mixture[m][i] += u.noise[m][i];
    }
  return u;
}

}  // namespace attnbf
