#pragma once

// Experiment orchestration behind the `ivprobe` command line tool.
//
// Output directory layout written by the commands:
//
//   representations.iprb, <feature>.csv, manifest.json     (synth)
//   trace_<mode>_seed<S>.json / .csv                       (inlp, intervene, control)
//   basis_probe.iprb(.steps), basis_control_seed<S>.iprb   (inlp, intervene, control)
//   head.ihead                                             (intervene, when trained)
//   summary.csv, curves_<mode>.csv, alignment.csv          (report)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ivprobe/errors.hpp"
#include "ivprobe/head.hpp"
#include "ivprobe/interventions.hpp"
#include "ivprobe/io.hpp"
#include "ivprobe/synthetic.hpp"

namespace ivprobe {

enum class HeadSource { File, TrainLinear, TrainTanh };

struct ExperimentConfig {
  // Input: either a matrix + label directory, or an inline synthetic spec.
  std::filesystem::path matrix;
  std::filesystem::path labels_dir;
  std::optional<SyntheticSpec> synthetic;

  Feature feature = Feature::Composite;
  Feature downstream = Feature::Entailment;
  std::vector<TraceMode> modes{TraceMode::Amnesic, TraceMode::Mnestic};

  HeadSource head_source = HeadSource::TrainTanh;
  std::filesystem::path head_path;
  std::size_t hidden = 64;
  ProbeConfig head_training{.epochs = 60, .learning_rate = 0.5, .l2_penalty = 0.0, .batch_size = 32};

  double split = 0.8;
  std::uint64_t split_seed = 7;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
  std::size_t control_max_k = 20;
  std::filesystem::path probe_basis;  // optional, for control alignment

  InlpConfig inlp;

  std::string experiment_id = "experiment";
  std::string model_id = "synthetic";
  std::filesystem::path out = "out";
  std::size_t workers = 1;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `key=value` assignment to `cfg`.
void apply_config_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Train/eval partition of the configured input.
struct PreparedData {
  RepresentationMatrix x_train;
  RepresentationMatrix x_eval;
  LabelVector y_train;  // probed feature
  LabelVector y_eval;
  LabelVector downstream_train;
  LabelVector downstream_eval;
};

PreparedData prepare_data(const ExperimentConfig& cfg);
ClassifierHead obtain_head(const ExperimentConfig& cfg, const PreparedData& data);

enum class RunStatus { Ok, Saturated };

/// Writes representations, the four label files and a manifest.
void cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// INLP only: probe basis and the amnesic probing trace.
RunStatus cmd_inlp(const ExperimentConfig& cfg);

/// INLP followed by step-wise downstream evaluation for every configured mode.
RunStatus cmd_intervene(const ExperimentConfig& cfg);

/// Random-direction removal/keep sweeps for k = 1..control_max_k.
void cmd_control(const ExperimentConfig& cfg);

/// Aggregates traces from `trace_dirs` into summary, curve and alignment CSVs.
void cmd_report(const std::vector<std::filesystem::path>& trace_dirs, const std::filesystem::path& out_dir);

/// Builds the trace for one projection mode of an INLP basis (or a random
/// basis regrouped on the same k schedule). Step -1 carries the unintervened
/// accuracies; `inlp` supplies probe accuracies for amnesic traces.
TraceReport build_trace(const ExperimentConfig& cfg, TraceMode mode, std::uint64_t seed,
                        const AccumulatedBasis& basis, const ClassifierHead& head, const PreparedData& data,
                        const InterventionTrace* inlp);

std::string trace_file_stem(TraceMode mode, std::uint64_t seed);

}  // namespace ivprobe
