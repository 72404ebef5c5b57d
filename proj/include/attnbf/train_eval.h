// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Training (negative-SNR loss, Adam, plateau schedule, early stopping,
// checkpoints) and evaluation (SDR / SI-SDR reports) for every method.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attnbf/dataset.h"
#include "attnbf/masking.h"
#include "attnbf/pipeline.h"

namespace attnbf {

// One utterance prepared for the network: mixture spectrogram, mask and the
// reverberant clean reference channel, scored over the STFT interior.
struct Example {
  std::string id;
  Spectrogram mixture;
  Mask mask;
  Signal target;
  Signal noisy_ref;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Builds an Example from in-memory signals. Uses the oracle mask of the
// reference channel unless `mask` is given.
Example make_example(const std::string& id, const MultiSignal& mixture, const MultiSignal& speech,
                     const StftConfig& stft, int ref, const Mask* mask = nullptr);
// Loads the record's WAVs. Without a speech reference, a mask file is
// required and target stays empty (no metrics).
Example load_example(const ManifestRecord& record, const StftConfig& stft, int ref);

// Random access to examples, loaded on demand so datasets need not fit in RAM.
struct ExampleSource {
  std::size_t count = 0;
  std::function<Example(std::size_t)> get;

  static ExampleSource in_memory(std::vector<Example> examples);
  static ExampleSource from_manifest(std::vector<ManifestRecord> records, const StftConfig& stft, int ref);
};

struct TrainConfig {
  int batch_size = 8;
  double lr = 1e-4;
  int max_epochs = 100;
  int max_steps = 0;  // 0: no step limit
  int early_stop_patience = 10;
  int lr_patience = 3;
  double lr_decay_factor = 0.5;
  std::uint64_t seed = 0;
  int checkpoint_every = 50;  // steps between latest.ckpt refreshes
  bool verbose = false;

  // Section [train].
  void bind(ConfigBinder& binder);
  void validate() const;
};

struct TrainResult {
  std::vector<double> step_losses;  // every step of this run, including resumed history
  std::vector<double> val_losses;   // per epoch
  long steps = 0;
  int epochs = 0;
  double best_val = 0.0;
  bool early_stopped = false;
};

// Output directory layout (when out_dir is non-empty):
//   loss_curve.csv   step,epoch,loss,lr (one row per optimizer step)
//   val_curve.csv    epoch,val_loss,lr,best
//   latest.ckpt(.cfg) + latest.state + latest.json   resumable state
//   best.ckpt(.cfg)  parameters with the lowest validation loss
// With resume set and latest.json present, training continues from the saved
// step. A non-finite loss writes latest.* from the last good parameters and
// throws NumericalError. When `val` is empty, the epoch's mean training loss
// drives scheduling.
TrainResult train(SpatialFilterModel& model, const ExampleSource& train_set, const ExampleSource& val_set,
                  const TrainConfig& cfg, const std::string& out_dir = "", bool resume = false);

// Loss (dB) of the model on one example, without building a tape.
double example_loss(const SpatialFilterModel& model, const Example& ex);
double mean_loss(const SpatialFilterModel& model, const ExampleSource& set);

// Enhanced reference-channel signal (full length) for any method. Learned
// methods need `model`; baselines ignore it.
Signal enhance_example(Method method, const SpatialFilterModel* model, const Example& ex,
                       const BaselineOptions& opts = {});

struct EvalRow {
  std::string id;
  double sdr = 0.0;
  double si_sdr = 0.0;
  double loss = 0.0;
  double noisy_sdr = 0.0;
  double noisy_si_sdr = 0.0;
};

struct EvalReport {
  std::string method;
  std::string dataset;
  std::vector<EvalRow> rows;

  EvalRow mean() const;  // arithmetic mean of every column, id "mean"
  // utt_id,method,dataset,sdr,si_sdr,loss,noisy_sdr,noisy_si_sdr,sdr_improvement
  void write_csv(const std::string& path) const;
};

// Runs every example through the method in parallel; rows keep input order.
// Examples without a reference are skipped in the metrics.
EvalReport evaluate(Method method, const SpatialFilterModel* model, const ExampleSource& set,
                    const std::string& dataset_id, const BaselineOptions& opts = {});

}  // namespace attnbf
