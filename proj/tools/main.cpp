// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// attnbf command-line tool: simulate, enhance, train, evaluate.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
// 4 numerical failure, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "attnbf/dataset.h"
#include "attnbf/error.h"
#include "attnbf/grid_io.h"
#include "attnbf/metrics.h"
#include "attnbf/parallel.h"
#include "attnbf/run_config.h"
#include "attnbf/train_eval.h"
#include "attnbf/wav.h"

namespace fs = std::filesystem;
using namespace attnbf;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage error: " + what) {}
};

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

bool is_manifest(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  return ext == ".jsonl" || ext == ".json";
}

std::unique_ptr<SpatialFilterModel> load_model_for(Method method, const std::string& checkpoint) {
  if (is_learned(method) && checkpoint.empty())
    throw UsageError("method " + method_name(method) + " requires --checkpoint");
  if (!is_learned(method) && !checkpoint.empty())
    throw UsageError("method " + method_name(method) + " is a baseline and takes no --checkpoint");
  if (checkpoint.empty()) return nullptr;
  auto model = SpatialFilterModel::load(checkpoint);
  if (model->config().variant != method)
    throw UsageError("checkpoint " + checkpoint + " holds a " + method_name(model->config().variant) +
                     " model, not " + method_name(method));
  return model;
}

// Example for enhancement: falls back to an all-ones mask when the method
// ignores masks and no reference or mask file is available.
Example enhance_input(const ManifestRecord& rec, Method method, const StftConfig& stft, int ref) {
  if (!rec.speech.empty() || !rec.mask.empty()) return load_example(rec, stft, ref);
  if (uses_mask(method)) throw UsageError("utterance " + rec.id + " has no reference and no mask; pass --mask");
  const Utterance u = load_utterance(rec);
  const Mask ones(stft.num_bins(), stft.num_frames(u.mixture.at(0).size()), 1.0);
  return make_example(u.id, u.mixture, {}, stft, ref, &ones);
}

// -- simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string out, config;
  int count = 1;
  bool dynamic = false, is_static = false;
  std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  make_dir(a.out);
  cfg.write((fs::path(a.out) / "config.effective").string());
  const auto records = simulate_dataset(a.out, a.count, a.dynamic, a.seed, cfg.simulator);
  std::printf("wrote %zu utterances and %s\n", records.size(), (fs::path(a.out) / "manifest.jsonl").c_str());
  return 0;
}

// -- enhance --------------------------------------------------------------------

struct EnhanceArgs {
  std::string in, method, checkpoint, mask, out, config;
};

int run_enhance(const EnhanceArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  const Method method = parse_method(a.method);
  const auto model = load_model_for(method, a.checkpoint);
  const StftConfig stft = model ? model->config().stft : cfg.model.stft;
  const int ref = model ? model->config().reference : cfg.baseline.ref.index;

  std::vector<ManifestRecord> records;
  if (is_manifest(a.in)) {
    if (!a.mask.empty()) throw UsageError("--mask applies to a single WAV input; manifests carry a mask field");
    records = read_manifest(a.in);
  } else {
    ManifestRecord r;
    r.id = fs::path(a.in).stem().string();
    r.mixture = a.in;
    r.mask = a.mask;
    records.push_back(r);
  }
  make_dir(a.out);
  cfg.write((fs::path(a.out) / "config.effective").string());

  std::vector<EvalRow> rows(records.size());
  std::vector<char> scored(records.size(), 0);
  parallel_for(records.size(), [&](std::size_t i) {
    const Example ex = enhance_input(records[i], method, stft, ref);
    const Signal out = enhance_example(method, model.get(), ex, cfg.baseline);
    write_wav((fs::path(a.out) / (ex.id + "_enhanced.wav")).string(), {stft.sample_rate, {out}});
    if (ex.target.empty()) return;
    EvalRow r;
    const auto span = [&](const Signal& s) {
      return std::span<const double>(s).subspan(ex.begin, ex.end - ex.begin);
    };
    r.id = ex.id;
    r.sdr = sdr(span(ex.target), span(out));
    r.si_sdr = si_sdr(span(ex.target), span(out));
    r.loss = -r.sdr;
    r.noisy_sdr = sdr(span(ex.target), span(ex.noisy_ref));
    r.noisy_si_sdr = si_sdr(span(ex.target), span(ex.noisy_ref));
    rows[i] = r;
    scored[i] = 1;
  });
  EvalReport report;
  report.method = method_name(method);
  report.dataset = fs::path(a.in).stem().string();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (scored[i]) report.rows.push_back(rows[i]);
  if (!report.rows.empty()) {
    const auto csv = (fs::path(a.out) / "metrics.csv").string();
    report.write_csv(csv);
    std::printf("mean SDR %.2f dB (input %.2f dB); metrics in %s\n", report.mean().sdr, report.mean().noisy_sdr,
                csv.c_str());
  }
  std::printf("enhanced %zu utterances into %s\n", records.size(), a.out.c_str());
  return 0;
}

// -- train ----------------------------------------------------------------------

struct TrainArgs {
  std::string variant, data, val, out, config;
  bool resume = false;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  cfg.model.variant = parse_method(a.variant);
  if (!is_learned(cfg.model.variant)) throw UsageError("--variant must be la|nla|ic|flsf");
  cfg.model.validate();
  const auto train_records = read_manifest(a.data);
  const auto val_records = a.val.empty() ? std::vector<ManifestRecord>{} : read_manifest(a.val);
  if (train_records.empty()) throw InvalidInput("training manifest " + a.data + " is empty");
  const Utterance probe = load_utterance(train_records.front());
  if (static_cast<int>(probe.mixture.size()) != cfg.model.mics)
    throw ConfigError("training data has " + std::to_string(probe.mixture.size()) + " channels but model.mics = " +
                      std::to_string(cfg.model.mics));

  make_dir(a.out);
  cfg.write((fs::path(a.out) / "config.effective").string());
  const auto& stft = cfg.model.stft;
  const auto train_set = ExampleSource::from_manifest(train_records, stft, cfg.model.reference);
  const auto val_set = ExampleSource::from_manifest(val_records, stft, cfg.model.reference);
  SpatialFilterModel model(cfg.model);
  const auto res = train(model, train_set, val_set, cfg.train, a.out, a.resume);
  std::printf("%ld steps, %d epochs, best validation loss %.3f dB%s\n", res.steps, res.epochs, res.best_val,
              res.early_stopped ? " (early stop)" : "");
  return 0;
}

// -- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string method, data, out, checkpoint, config, dataset;
};

int run_evaluate(const EvaluateArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  const Method method = parse_method(a.method);
  const auto model = load_model_for(method, a.checkpoint);
  const StftConfig stft = model ? model->config().stft : cfg.model.stft;
  const int ref = model ? model->config().reference : cfg.baseline.ref.index;
  const auto records = read_manifest(a.data);
  const auto set = ExampleSource::from_manifest(records, stft, ref);
  const auto report = evaluate(method, model.get(), set, a.dataset.empty() ? fs::path(a.data).stem().string() : a.dataset,
                               cfg.baseline);
  const fs::path out(a.out);
  if (out.has_parent_path()) make_dir(out.parent_path().string());
  report.write_csv(a.out);
  cfg.write(a.out + ".config");
  const auto m = report.mean();
  std::printf("%s on %zu utterances: SDR %.2f dB, SI-SDR %.2f dB (input %.2f / %.2f dB)\n", report.method.c_str(),
              report.rows.size(), m.sdr, m.si_sdr, m.noisy_sdr, m.noisy_si_sdr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal multichannel speech enhancement with attention-driven spatial filters"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Render a simulated dataset with a JSON-lines manifest");
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--count", sim.count, "Number of utterances")->required()->check(CLI::NonNegativeNumber);
  auto* dyn = s->add_flag("--dynamic", sim.dynamic, "Moving sources");
  auto* sta = s->add_flag("--static", sim.is_static, "Static sources");
  dyn->excludes(sta);
  s->add_option("--seed", sim.seed, "Master seed")->required();
  s->add_option("--config", sim.config, "Config file")->check(CLI::ExistingFile);

  EnhanceArgs enh;
  auto* e = app.add_subcommand("enhance", "Enhance a WAV file or every utterance in a manifest");
  e->add_option("--in", enh.in, "Multichannel WAV or .jsonl manifest")->required()->check(CLI::ExistingFile);
  e->add_option("--method", enh.method, "identity|cum|rec|block|la|nla|ic|flsf")->required();
  e->add_option("--checkpoint", enh.checkpoint, "Model checkpoint (learned methods)")->check(CLI::ExistingFile);
  e->add_option("--mask", enh.mask, "Mask grid file for a single WAV input")->check(CLI::ExistingFile);
  e->add_option("--out", enh.out, "Output directory")->required();
  e->add_option("--config", enh.config, "Config file")->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a spatial filter network");
  t->add_option("--variant", tr.variant, "la|nla|ic|flsf")->required();
  t->add_option("--data", tr.data, "Training manifest")->required()->check(CLI::ExistingFile);
  t->add_option("--val", tr.val, "Validation manifest")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--config", tr.config, "Config file")->check(CLI::ExistingFile);
  t->add_flag("--resume", tr.resume, "Continue from the latest checkpoint in --out");

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Score a method on a manifest and write a CSV report");
  v->add_option("--method", ev.method, "identity|cum|rec|block|la|nla|ic|flsf")->required();
  v->add_option("--data", ev.data, "Manifest with clean references")->required()->check(CLI::ExistingFile);
  v->add_option("--out", ev.out, "Report CSV path")->required();
  v->add_option("--checkpoint", ev.checkpoint, "Model checkpoint (learned methods)")->check(CLI::ExistingFile);
  v->add_option("--config", ev.config, "Config file")->check(CLI::ExistingFile);
  v->add_option("--dataset", ev.dataset, "Dataset label for the report (default: manifest name)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) {
      if (sim.dynamic == sim.is_static) throw UsageError("pass exactly one of --dynamic or --static");
      return run_simulate(sim);
    }
    if (*e) return run_enhance(enh);
    if (*t) return run_train(tr);
    if (*v) return run_evaluate(ev);
  } catch (const UsageError& err) {
    std::cerr << "attnbf: " << err.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& err) {
    std::cerr << "attnbf: " << err.what() << '\n';
    return kExitUsage;
  } catch (const IoError& err) {
    std::cerr << "attnbf: " << err.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& err) {
    std::cerr << "attnbf: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "attnbf: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
