// ivprobe: probe-guided amnesic/mnestic interventions on representation dumps.
//
//   ivprobe synth     --out DIR [--config FILE] [--set synth.d=64 ...]
//   ivprobe inlp      --config FILE [--seed N] [--out DIR]
//   ivprobe intervene --config FILE [--seed N] [--out DIR] [--workers N]
//   ivprobe control   --config FILE [--seed N] [--out DIR] [--workers N]
//   ivprobe report    DIR... --out DIR
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 INLP saturation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ivprobe/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSaturated = 4;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required) {
  auto* config = cmd->add_option("--config", opts.config, "key=value experiment configuration file");
  if (config_required) config->required();
  cmd->add_option("--seed", opts.seed, "base seed for probes and controls");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--workers", opts.workers, "concurrent runs");
  cmd->add_option("--set", opts.overrides, "override a config entry, key=value (repeatable)");
}

ivprobe::ExperimentConfig resolve(const CommonOptions& opts) {
  auto cfg = opts.config.empty() ? ivprobe::ExperimentConfig{} : ivprobe::load_config(opts.config);
  for (const auto& o : opts.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ivprobe::ConfigError("--set expects key=value, got '" + o + "'");
    ivprobe::apply_config_entry(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.out = opts.out;
  if (opts.workers) cfg.workers = *opts.workers;
  return cfg;
}

int status_code(ivprobe::RunStatus s) {
  if (s == ivprobe::RunStatus::Saturated) {
    std::cerr << "ivprobe: INLP saturated the representation space before reaching the majority baseline; "
                 "partial results written and flagged\n";
    return kExitSaturated;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probe-guided amnesic and mnestic interventions on classifier representations"};
  app.require_subcommand(1);

  CommonOptions synth_opts, inlp_opts, intervene_opts, control_opts;
  auto* synth = app.add_subcommand("synth", "generate a synthetic natural-logic representation dataset");
  add_common(synth, synth_opts, false);
  auto* inlp = app.add_subcommand("inlp", "run iterative nullspace projection on one feature");
  add_common(inlp, inlp_opts, true);
  auto* intervene = app.add_subcommand("intervene", "INLP plus step-wise amnesic/mnestic/control evaluation");
  add_common(intervene, intervene_opts, true);
  auto* control = app.add_subcommand("control", "random-direction removal and keep sweeps");
  add_common(control, control_opts, true);

  std::vector<std::string> report_dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "aggregate trace directories into tables and plot data");
  report->add_option("dirs", report_dirs, "trace directories")->required();
  report->add_option("--out", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) {
      auto cfg = resolve(synth_opts);
      const auto spec = cfg.synthetic.value_or(ivprobe::SyntheticSpec{});
      try {
        spec.validate();
      } catch (const ivprobe::InvalidInput& e) {
        throw ivprobe::ConfigError(e.what());
      }
      ivprobe::cmd_synth(spec, cfg.out);
      return kExitOk;
    }
    if (*inlp) return status_code(ivprobe::cmd_inlp(resolve(inlp_opts)));
    if (*intervene) return status_code(ivprobe::cmd_intervene(resolve(intervene_opts)));
    if (*control) {
      ivprobe::cmd_control(resolve(control_opts));
      return kExitOk;
    }
    if (*report) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
      ivprobe::cmd_report(dirs, report_out);
      return kExitOk;
    }
  } catch (const ivprobe::ConfigError& e) {
    std::cerr << "ivprobe: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ivprobe::Error& e) {
    std::cerr << "ivprobe: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "ivprobe: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
