// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/train_eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "attnbf/csv.h"
#include "attnbf/error.h"
#include "attnbf/grid_io.h"
#include "attnbf/metrics.h"
#include "attnbf/parallel.h"

namespace attnbf {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kLossHeader = {"step", "epoch", "loss", "lr"};
const std::vector<std::string> kValHeader = {"epoch", "val_loss", "lr", "best"};

std::span<const double> interior(const Signal& s, const Example& ex) {
  return std::span<const double>(s).subspan(ex.begin, ex.end - ex.begin);
}

// Mutable training state persisted in latest.json.
struct Progress {
  long step = 0;
  int epoch = 0;
  int batch = 0;  // next batch index within the epoch
  double lr = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  double epoch_sum = 0.0;
  long epoch_count = 0;
};

json progress_json(const Progress& p, std::uint64_t seed) {
  return {{"step", p.step},
          {"epoch", p.epoch},
          {"batch", p.batch},
          {"lr", p.lr},
          {"best_val", std::isfinite(p.best_val) ? json(p.best_val) : json(nullptr)},
          {"bad_epochs", p.bad_epochs},
          {"epoch_sum", p.epoch_sum},
          {"epoch_count", p.epoch_count},
          {"seed", seed}};
}

Progress progress_from_json(const json& j) {
  Progress p;
  p.step = j.at("step").get<long>();
  p.epoch = j.at("epoch").get<int>();
  p.batch = j.at("batch").get<int>();
  p.lr = j.at("lr").get<double>();
  p.best_val = j.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : j.at("best_val").get<double>();
  p.bad_epochs = j.at("bad_epochs").get<int>();
  p.epoch_sum = j.at("epoch_sum").get<double>();
  p.epoch_count = j.at("epoch_count").get<long>();
  return p;
}

void save_latest(const fs::path& dir, const SpatialFilterModel& model, const Adam& adam, const Progress& p,
                 std::uint64_t seed) {
  model.save((dir / "latest.ckpt").string());
  std::vector<NamedTensor> moments;
  const auto& params = model.params().params();
  const auto& st = adam.state();
  for (std::size_t i = 0; i < params.size() && i < st.m.size(); ++i) {
    if (st.m[i].empty()) continue;
    moments.push_back({"m." + params[i].name, params[i].tensor.shape(), st.m[i]});
    moments.push_back({"v." + params[i].name, params[i].tensor.shape(), st.v[i]});
  }
  save_tensors((dir / "latest.state").string(), moments);
  json j = progress_json(p, seed);
  j["adam_step"] = st.step;
  std::ofstream out(dir / "latest.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "latest.json").string());
}

void load_latest(const fs::path& dir, SpatialFilterModel& model, Adam& adam, Progress& p) {
  std::ifstream in(dir / "latest.json");
  if (!in) throw IoError("cannot read " + (dir / "latest.json").string());
  json j;
  try {
    in >> j;
    p = progress_from_json(j);
  } catch (const json::exception& e) {
    throw IoError("malformed latest.json: " + std::string(e.what()));
  }
  load_checkpoint((dir / "latest.ckpt").string(), model.params());
  const auto& params = model.params().params();
  auto& st = adam.state();
  st.step = j.value("adam_step", 0L);
  st.m.assign(params.size(), {});
  st.v.assign(params.size(), {});
  for (const auto& t : load_tensors((dir / "latest.state").string())) {
    const bool first = t.name.rfind("m.", 0) == 0;
    const std::string name = t.name.substr(2);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) (first ? st.m[i] : st.v[i]) = t.values;
  }
  adam.set_lr(p.lr);
}

// Keeps the rows of a curve file whose first column satisfies `keep`.
std::vector<std::vector<std::string>> kept_rows(const fs::path& path, const std::function<bool(double)>& keep) {
  std::vector<std::vector<std::string>> rows;
  if (!fs::exists(path)) return rows;
  auto all = read_csv(path.string());
  for (std::size_t i = 1; i < all.size(); ++i)
    if (!all[i].empty() && keep(std::stod(all[i][0]))) rows.push_back(all[i]);
  return rows;
}

}  // namespace

// -- examples -------------------------------------------------------------------

Example make_example(const std::string& id, const MultiSignal& mixture, const MultiSignal& speech,
                     const StftConfig& stft, int ref, const Mask* mask) {
  if (mixture.empty() || ref < 0 || ref >= static_cast<int>(mixture.size()))
    throw InvalidInput("example " + id + ": reference channel out of range");
  Example ex;
  ex.id = id;
  ex.mixture = analyze(mixture, stft);
  ex.noisy_ref = mixture[ref];
  std::tie(ex.begin, ex.end) = interior_range(mixture[0].size(), stft);
  if (!speech.empty()) {
    if (speech.size() != mixture.size() || speech[ref].size() != mixture[ref].size())
      throw InvalidInput("example " + id + ": speech and mixture shapes differ");
    ex.target = speech[ref];
  }
  if (mask) {
    if (mask->bins() != ex.mixture.bins() || mask->frames() != ex.mixture.frames())
      throw InvalidInput("example " + id + ": mask shape does not match the mixture spectrogram");
    ex.mask = *mask;
  } else if (!speech.empty()) {
    ex.mask = oracle_mask(analyze({speech[ref]}, stft), ex.mixture.channel(ref));
  } else {
    throw InvalidInput("example " + id + ": needs a clean reference or a mask");
  }
  return ex;
}

Example load_example(const ManifestRecord& record, const StftConfig& stft, int ref) {
  const Utterance u = load_utterance(record);
  if (u.sample_rate != stft.sample_rate)
    throw InvalidInput("utterance " + u.id + ": sample rate " + std::to_string(u.sample_rate) +
                       " differs from the STFT configuration");
  if (!u.mask_path.empty()) {
    const Mask mask = Mask::from_grid(read_grid(u.mask_path));
    return make_example(u.id, u.mixture, u.speech, stft, ref, &mask);
  }
  return make_example(u.id, u.mixture, u.speech, stft, ref);
}

ExampleSource ExampleSource::in_memory(std::vector<Example> examples) {
  auto shared = std::make_shared<std::vector<Example>>(std::move(examples));
  return {shared->size(), [shared](std::size_t i) { return shared->at(i); }};
}

ExampleSource ExampleSource::from_manifest(std::vector<ManifestRecord> records, const StftConfig& stft, int ref) {
  auto shared = std::make_shared<std::vector<ManifestRecord>>(std::move(records));
  return {shared->size(), [shared, stft, ref](std::size_t i) { return load_example(shared->at(i), stft, ref); }};
}

// -- config ---------------------------------------------------------------------

void TrainConfig::bind(ConfigBinder& b) {
  b.bind("train", "batch_size", batch_size);
  b.bind("train", "lr", lr);
  b.bind("train", "max_epochs", max_epochs);
  b.bind("train", "max_steps", max_steps);
  b.bind("train", "early_stop_patience", early_stop_patience);
  b.bind("train", "lr_patience", lr_patience);
  b.bind("train", "lr_decay_factor", lr_decay_factor);
  b.bind("train", "seed", seed);
  b.bind("train", "checkpoint_every", checkpoint_every);
  b.bind("train", "verbose", verbose);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be non-negative");
  if (early_stop_patience < 1) throw ConfigError("train.early_stop_patience must be at least 1");
  if (lr_patience < 1) throw ConfigError("train.lr_patience must be at least 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("train.lr_decay_factor must be in (0, 1]");
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be at least 1");
}

// -- losses ---------------------------------------------------------------------

double example_loss(const SpatialFilterModel& model, const Example& ex) {
  if (ex.target.empty()) throw InvalidInput("example " + ex.id + " has no reference signal");
  ad::NoGradGuard no_grad;
  return snr_loss_tensor(model.forward(ex.mixture, ex.mask), ex.target, ex.begin, ex.end).item();
}

double mean_loss(const SpatialFilterModel& model, const ExampleSource& set) {
  if (set.count == 0) throw InvalidInput("mean_loss: empty example set");
  double acc = 0.0;
  for (std::size_t i = 0; i < set.count; ++i) acc += example_loss(model, set.get(i));
  return acc / static_cast<double>(set.count);
}

// -- training -------------------------------------------------------------------

TrainResult train(SpatialFilterModel& model, const ExampleSource& train_set, const ExampleSource& val_set,
                  const TrainConfig& cfg, const std::string& out_dir, bool resume) {
  cfg.validate();
  if (train_set.count == 0) throw InvalidInput("train: empty training set");
  const bool persist = !out_dir.empty();
  const fs::path dir(out_dir);
  if (persist) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  }

  Adam adam(model.params(), AdamConfig{cfg.lr});
  Progress p;
  p.lr = cfg.lr;
  TrainResult result;
  const bool resuming = persist && resume && fs::exists(dir / "latest.json");
  if (resuming) {
    load_latest(dir, model, adam, p);
    for (const auto& row : kept_rows(dir / "loss_curve.csv", [&](double s) { return s <= p.step; }))
      result.step_losses.push_back(std::stod(row.at(2)));
  }

  std::unique_ptr<CsvWriter> loss_csv, val_csv;
  if (persist) {
    // Rewrite the curves so that rows past the restored step disappear.
    const auto loss_rows = kept_rows(dir / "loss_curve.csv", [&](double s) { return resuming && s <= p.step; });
    const auto val_rows = kept_rows(dir / "val_curve.csv", [&](double e) { return resuming && e < p.epoch; });
    loss_csv = std::make_unique<CsvWriter>((dir / "loss_curve.csv").string(), kLossHeader);
    for (const auto& r : loss_rows) loss_csv->row(r);
    val_csv = std::make_unique<CsvWriter>((dir / "val_curve.csv").string(), kValHeader);
    for (const auto& r : val_rows) {
      val_csv->row(r);
      result.val_losses.push_back(std::stod(r.at(1)));
    }
    loss_csv->flush();
    val_csv->flush();
  }

  const std::size_t n = train_set.count;
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch_size);
  const int batches = static_cast<int>((n + bsz - 1) / bsz);
  bool best_saved = persist && resuming && fs::exists(dir / "best.ckpt");
  bool stop = false;

  auto save_best = [&] {
    if (persist) model.save((dir / "best.ckpt").string());
    best_saved = true;
  };

  while (!stop && p.epoch < cfg.max_epochs) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(cfg.seed ^ static_cast<std::uint64_t>(p.epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (; p.batch < batches; ++p.batch) {
      if (cfg.max_steps > 0 && p.step >= cfg.max_steps) {
        stop = true;
        break;
      }
      model.params().zero_grad();
      const std::size_t first = std::size_t(p.batch) * bsz;
      const std::size_t last = std::min(n, first + bsz);
      const double inv = 1.0 / static_cast<double>(last - first);
      double batch_loss = 0.0;
      for (std::size_t k = first; k < last; ++k) {
        const Example ex = train_set.get(order[k]);
        if (ex.target.empty()) throw InvalidInput("training example " + ex.id + " has no reference signal");
        const ad::Tensor loss = snr_loss_tensor(model.forward(ex.mixture, ex.mask), ex.target, ex.begin, ex.end);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          if (persist) save_latest(dir, model, adam, p, cfg.seed);
          throw NumericalError("non-finite training loss at step " + std::to_string(p.step + 1) + " (utterance " +
                               ex.id + "); last good parameters kept in latest.ckpt");
        }
        if (loss.requires_grad()) ad::backward(ad::scale(loss, inv));
        batch_loss += value * inv;
      }
      adam.step();
      ++p.step;
      p.epoch_sum += batch_loss * static_cast<double>(last - first);
      p.epoch_count += static_cast<long>(last - first);
      result.step_losses.push_back(batch_loss);
      if (loss_csv) {
        loss_csv->row({std::to_string(p.step), std::to_string(p.epoch), format_double(batch_loss), format_double(p.lr)});
        loss_csv->flush();
      }
      if (cfg.verbose) std::fprintf(stderr, "step %ld epoch %d loss %.4f dB\n", p.step, p.epoch, batch_loss);
      if (persist && p.step % cfg.checkpoint_every == 0) {
        Progress snapshot = p;
        snapshot.batch = p.batch + 1;
        save_latest(dir, model, adam, snapshot, cfg.seed);
      }
    }
    if (stop) break;

    // End of epoch: schedule on validation loss.
    const double val = val_set.count > 0 ? mean_loss(model, val_set) : p.epoch_sum / std::max(1L, p.epoch_count);
    result.val_losses.push_back(val);
    const bool improved = val < p.best_val;
    if (improved) {
      p.best_val = val;
      p.bad_epochs = 0;
      save_best();
    } else {
      ++p.bad_epochs;
    }
    if (val_csv) {
      val_csv->row({std::to_string(p.epoch), format_double(val), format_double(p.lr), improved ? "1" : "0"});
      val_csv->flush();
    }
    if (cfg.verbose) std::fprintf(stderr, "epoch %d validation %.4f dB lr %g\n", p.epoch, val, p.lr);
    if (!improved && p.bad_epochs % cfg.lr_patience == 0) {
      p.lr *= cfg.lr_decay_factor;
      adam.set_lr(p.lr);
    }
    ++p.epoch;
    p.batch = 0;
    p.epoch_sum = 0.0;
    p.epoch_count = 0;
    if (p.bad_epochs >= cfg.early_stop_patience) {
      result.early_stopped = true;
      stop = true;
    }
    if (persist) save_latest(dir, model, adam, p, cfg.seed);
  }

  if (persist) {
    save_latest(dir, model, adam, p, cfg.seed);
    if (!best_saved) save_best();
  }
  result.steps = p.step;
  result.epochs = p.epoch;
  result.best_val = p.best_val;
  return result;
}

// -- evaluation -----------------------------------------------------------------

Signal enhance_example(Method method, const SpatialFilterModel* model, const Example& ex, const BaselineOptions& opts) {
  Spectrogram out;
  if (is_learned(method)) {
    if (!model) throw ConfigError("method " + method_name(method) + " needs a checkpoint");
    if (model->config().variant != method)
      throw ConfigError("checkpoint holds a " + method_name(model->config().variant) + " model, not " +
                        method_name(method));
    out = model->enhance(ex.mixture, ex.mask);
  } else {
    out = enhance_baseline(method, ex.mixture, ex.mask, opts);
  }
  return synthesize(out)[0];
}

EvalRow EvalReport::mean() const {
  EvalRow m;
  m.id = "mean";
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.sdr += r.sdr;
    m.si_sdr += r.si_sdr;
    m.loss += r.loss;
    m.noisy_sdr += r.noisy_sdr;
    m.noisy_si_sdr += r.noisy_si_sdr;
  }
  const double k = static_cast<double>(rows.size());
  m.sdr /= k;
  m.si_sdr /= k;
  m.loss /= k;
  m.noisy_sdr /= k;
  m.noisy_si_sdr /= k;
  return m;
}

void EvalReport::write_csv(const std::string& path) const {
  CsvWriter csv(path, {"utt_id", "method", "dataset", "sdr", "si_sdr", "loss", "noisy_sdr", "noisy_si_sdr",
                       "sdr_improvement"});
  auto emit = [&](const EvalRow& r) {
    csv.row({r.id, method, dataset, format_double(r.sdr), format_double(r.si_sdr), format_double(r.loss),
             format_double(r.noisy_sdr), format_double(r.noisy_si_sdr), format_double(r.sdr - r.noisy_sdr)});
  };
  for (const auto& r : rows) emit(r);
  emit(mean());
}

EvalReport evaluate(Method method, const SpatialFilterModel* model, const ExampleSource& set,
                    const std::string& dataset_id, const BaselineOptions& opts) {
  EvalReport report;
  report.method = method_name(method);
  report.dataset = dataset_id;
  std::vector<EvalRow> rows(set.count);
  std::vector<char> scored(set.count, 0);
  parallel_for(set.count, [&](std::size_t i) {
    const Example ex = set.get(i);
    const Signal out = enhance_example(method, model, ex, opts);
    if (ex.target.empty()) return;
    EvalRow r;
    r.id = ex.id;
    const auto s = interior(ex.target, ex);
    r.sdr = sdr(s, interior(out, ex));
    r.si_sdr = si_sdr(s, interior(out, ex));
    r.loss = -r.sdr;
    r.noisy_sdr = sdr(s, interior(ex.noisy_ref, ex));
    r.noisy_si_sdr = si_sdr(s, interior(ex.noisy_ref, ex));
    rows[i] = r;
    scored[i] = 1;
  });
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (scored[i]) report.rows.push_back(rows[i]);
  return report;
}

}  // namespace attnbf
