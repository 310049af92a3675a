#include "ivprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace ivprobe {
namespace fs = std::filesystem;

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(',', start);
    if (pos == std::string_view::npos) pos = s.size();
    const auto item = trim(s.substr(start, pos - start));
    if (!item.empty()) out.push_back(item);
    start = pos + 1;
  }
  return out;
}

SyntheticSpec& synth(ExperimentConfig& cfg) {
  if (!cfg.synthetic) cfg.synthetic = SyntheticSpec{};
  return *cfg.synthetic;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items write
// only to their own slot, so results do not depend on scheduling.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

LabelVector load_feature_labels(const fs::path& dir, Feature feature, std::size_t rows) {
  const auto name = std::string(feature_name(feature));
  const auto path = dir / (name + ".csv");
  std::vector<std::uint32_t> values;
  if (fs::exists(path)) {
    auto col = read_labels(path);
    if (col.feature != name) {
      throw InvalidInput(path.string() + ": header names feature '" + col.feature + "', expected '" + name + "'");
    }
    values = std::move(col.values);
  } else if (feature == Feature::Composite) {
    const auto mono = load_feature_labels(dir, Feature::Monotonicity, rows);
    const auto rel = load_feature_labels(dir, Feature::Relation, rows);
    values.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      values[i] = composite_id(static_cast<Monotonicity>(mono[i]), static_cast<Relation>(rel[i]));
    }
  } else {
    throw InvalidInput("missing label file " + path.string());
  }
  if (values.size() != rows) {
    throw InvalidInput(path.string() + ": " + std::to_string(values.size()) + " labels for " +
                       std::to_string(rows) + " matrix rows");
  }
  return LabelVector(std::move(values), feature_class_count(feature), feature_class_names(feature));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw InvalidInput("train/eval split of " + std::to_string(n) + " rows leaves one side empty");
  }
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> eval(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {std::move(train), std::move(eval)};
}

json spec_json(const SyntheticSpec& s) {
  return {{"n_examples", s.n_examples},     {"ambient_dim", s.ambient_dim}, {"redundancy", s.redundancy},
          {"noise_sigma", s.noise_sigma},   {"nuisance_dim", s.nuisance_dim},
          {"nuisance_scale", s.nuisance_scale}, {"seed", s.seed}};
}

json config_json(const ExperimentConfig& c) {
  json modes = json::array();
  for (auto m : c.modes) modes.push_back(trace_mode_name(m));
  json j = {
      {"experiment_id", c.experiment_id},
      {"model_id", c.model_id},
      {"feature", feature_name(c.feature)},
      {"downstream", feature_name(c.downstream)},
      {"modes", modes},
      {"split", c.split},
      {"split_seed", c.split_seed},
      {"repetitions", c.repetitions},
      {"seed", c.seed},
      {"control_max_k", c.control_max_k},
      {"inlp", {{"max_iters", c.inlp.max_iters}, {"stop_margin", c.inlp.stop_margin}, {"patience", c.inlp.patience}}},
      {"probe",
       {{"epochs", c.inlp.probe.epochs},
        {"learning_rate", c.inlp.probe.learning_rate},
        {"l2_penalty", c.inlp.probe.l2_penalty},
        {"batch_size", c.inlp.probe.batch_size},
        {"loss", c.inlp.probe.loss == LossKind::Hinge ? "hinge" : "logistic"}}},
  };
  if (c.synthetic) {
    j["synthetic"] = spec_json(*c.synthetic);
  } else {
    j["matrix"] = c.matrix.generic_string();
    j["labels"] = c.labels_dir.generic_string();
  }
  switch (c.head_source) {
    case HeadSource::File: j["head"] = c.head_path.generic_string(); break;
    case HeadSource::TrainLinear: j["head"] = "linear"; break;
    case HeadSource::TrainTanh: j["head"] = "tanh"; j["hidden"] = c.hidden; break;
  }
  if (c.head_source != HeadSource::File) {
    j["head_training"] = {{"epochs", c.head_training.epochs},
                          {"learning_rate", c.head_training.learning_rate},
                          {"l2_penalty", c.head_training.l2_penalty},
                          {"batch_size", c.head_training.batch_size}};
  }
  return j;
}

void write_manifest(const fs::path& out, json manifest) { write_file(out / "manifest.json", manifest.dump(2) + "\n"); }

bool is_projection_mode(TraceMode m) { return m == TraceMode::Amnesic || m == TraceMode::Mnestic; }

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

struct Band {
  std::size_t k = 0;
  std::vector<double> downstream;
  std::vector<double> probe;
};

std::string band_cells(const std::vector<double>& v) {
  if (v.empty()) return ",,";
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return format_double(*lo) + "," + format_double(mean) + "," + format_double(*hi);
}

std::optional<std::uint64_t> control_seed_from_name(const std::string& name) {
  constexpr std::string_view prefix = "basis_control_seed";
  constexpr std::string_view suffix = ".iprb";
  if (name.size() <= prefix.size() + suffix.size() || name.rfind(prefix, 0) != 0 ||
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  const auto digits = std::string_view(name).substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  std::uint64_t seed = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return seed;
}

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidInput("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// --- configuration ----------------------------------------------------------

void ExperimentConfig::validate() const {
  if (!synthetic && matrix.empty()) throw ConfigError("config: either 'matrix' or 'synth.*' keys are required");
  if (!synthetic && labels_dir.empty()) throw ConfigError("config: 'labels' directory is required with 'matrix'");
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("config: split must lie in (0, 1)");
  if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (modes.empty()) throw ConfigError("config: at least one mode is required");
  if (head_source == HeadSource::File && head_path.empty()) throw ConfigError("config: head file path is empty");
  if (head_source == HeadSource::TrainTanh && hidden < 1) throw ConfigError("config: hidden must be >= 1");
  if (control_max_k < 1) throw ConfigError("config: control_max_k must be >= 1");
  if (experiment_id.empty() || model_id.empty()) throw ConfigError("config: experiment_id and model_id must be set");
  for (const auto& id : {experiment_id, model_id}) {
    if (id.find_first_of(",\n\r\"") != std::string::npos) {
      throw ConfigError("config: ids must not contain commas, quotes or newlines");
    }
  }
  try {
    inlp.validate();
    head_training.validate();
    if (synthetic) synthetic->validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void apply_config_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  auto feature = [&] {
    try {
      return parse_feature(value);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config key '") + std::string(key) + "': " + e.what());
    }
  };

  if (key == "matrix") cfg.matrix = std::string(value);
  else if (key == "labels") cfg.labels_dir = std::string(value);
  else if (key == "feature") cfg.feature = feature();
  else if (key == "downstream") cfg.downstream = feature();
  else if (key == "modes") {
    cfg.modes.clear();
    for (auto m : split_list(value)) {
      try {
        cfg.modes.push_back(parse_trace_mode(m));
      } catch (const InvalidInput& e) {
        throw ConfigError(std::string("config key 'modes': ") + e.what());
      }
    }
  } else if (key == "head") {
    if (value == "linear") cfg.head_source = HeadSource::TrainLinear;
    else if (value == "tanh") cfg.head_source = HeadSource::TrainTanh;
    else {
      cfg.head_source = HeadSource::File;
      cfg.head_path = std::string(value);
    }
  } else if (key == "hidden") cfg.hidden = size();
  else if (key == "head.epochs") cfg.head_training.epochs = size();
  else if (key == "head.learning_rate") cfg.head_training.learning_rate = real();
  else if (key == "head.l2_penalty") cfg.head_training.l2_penalty = real();
  else if (key == "head.batch_size") cfg.head_training.batch_size = size();
  else if (key == "split") cfg.split = real();
  else if (key == "split_seed") cfg.split_seed = u64();
  else if (key == "repetitions") cfg.repetitions = size();
  else if (key == "seed") cfg.seed = u64();
  else if (key == "control_max_k") cfg.control_max_k = size();
  else if (key == "probe_basis") cfg.probe_basis = std::string(value);
  else if (key == "experiment_id") cfg.experiment_id = std::string(value);
  else if (key == "model_id") cfg.model_id = std::string(value);
  else if (key == "out") cfg.out = std::string(value);
  else if (key == "workers") cfg.workers = size();
  else if (key == "inlp.max_iters") cfg.inlp.max_iters = size();
  else if (key == "inlp.stop_margin") cfg.inlp.stop_margin = real();
  else if (key == "inlp.patience") cfg.inlp.patience = size();
  else if (key == "probe.epochs") cfg.inlp.probe.epochs = size();
  else if (key == "probe.learning_rate") cfg.inlp.probe.learning_rate = real();
  else if (key == "probe.l2_penalty") cfg.inlp.probe.l2_penalty = real();
  else if (key == "probe.batch_size") cfg.inlp.probe.batch_size = size();
  else if (key == "probe.loss") {
    if (value == "hinge") cfg.inlp.probe.loss = LossKind::Hinge;
    else if (value == "logistic") cfg.inlp.probe.loss = LossKind::Logistic;
    else throw ConfigError("config key 'probe.loss' must be hinge or logistic");
  } else if (key == "synth.n") synth(cfg).n_examples = size();
  else if (key == "synth.d") synth(cfg).ambient_dim = size();
  else if (key == "synth.r") synth(cfg).redundancy = size();
  else if (key == "synth.noise") synth(cfg).noise_sigma = real();
  else if (key == "synth.nuisance") synth(cfg).nuisance_dim = size();
  else if (key == "synth.nuisance_scale") synth(cfg).nuisance_scale = real();
  else if (key == "synth.seed") synth(cfg).seed = u64();
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

// --- data -------------------------------------------------------------------

PreparedData prepare_data(const ExperimentConfig& cfg) {
  std::optional<RepresentationMatrix> x;
  std::optional<LabelVector> y;
  std::optional<LabelVector> downstream;
  if (cfg.synthetic) {
    auto ds = generate(*cfg.synthetic);
    y = ds.labels.feature(cfg.feature);
    downstream = ds.labels.feature(cfg.downstream);
    x = std::move(ds.representations);
  } else {
    x = read_matrix(cfg.matrix);
    y = load_feature_labels(cfg.labels_dir, cfg.feature, x->rows());
    downstream = load_feature_labels(cfg.labels_dir, cfg.downstream, x->rows());
  }
  const auto [train, eval] = split_indices(x->rows(), cfg.split, cfg.split_seed);
  return {x->select_rows(train), x->select_rows(eval), y->select(train),
          y->select(eval),       downstream->select(train), downstream->select(eval)};
}

ClassifierHead obtain_head(const ExperimentConfig& cfg, const PreparedData& data) {
  if (cfg.head_source == HeadSource::File) {
    auto head = read_head(cfg.head_path);
    if (head.input_dim() != data.x_train.cols()) {
      throw InvalidInput("head input dimension " + std::to_string(head.input_dim()) +
                         " does not match representation dimension " + std::to_string(data.x_train.cols()));
    }
    if (head.class_count() != data.downstream_eval.class_count()) {
      throw InvalidInput("head produces " + std::to_string(head.class_count()) + " classes but the '" +
                         std::string(feature_name(cfg.downstream)) + "' labels have " +
                         std::to_string(data.downstream_eval.class_count()));
    }
    return head;
  }
  ProbeConfig pc = cfg.head_training;
  pc.seed = cfg.seed;
  const auto hidden = cfg.head_source == HeadSource::TrainTanh ? std::optional<std::size_t>(cfg.hidden) : std::nullopt;
  return train_head(data.x_train, data.downstream_train, pc, hidden);
}

std::string trace_file_stem(TraceMode mode, std::uint64_t seed) {
  return "trace_" + std::string(trace_mode_name(mode)) + "_seed" + std::to_string(seed);
}

TraceReport build_trace(const ExperimentConfig& cfg, TraceMode mode, std::uint64_t seed,
                        const AccumulatedBasis& basis, const ClassifierHead& head, const PreparedData& data,
                        const InterventionTrace* inlp) {
  TraceReport report;
  report.dim = data.x_eval.cols();
  const double baseline = majority_baseline(data.y_eval);

  auto probe_at = [&](std::size_t k) -> std::optional<double> {
    if (!inlp) return std::nullopt;
    std::optional<double> found;
    for (const auto& s : inlp->steps) {
      if (s.k_before == k) found = s.probe_accuracy;
    }
    return found;
  };

  TraceRecord start;
  start.experiment_id = cfg.experiment_id;
  start.model_id = cfg.model_id;
  start.feature = std::string(feature_name(cfg.feature));
  start.mode = mode;
  start.step = -1;
  start.k = 0;
  start.probe_accuracy = probe_at(0);
  start.majority_baseline = baseline;
  start.downstream_accuracy = head_accuracy(head, data.x_eval, data.downstream_eval);
  start.seed = seed;
  report.records.push_back(start);

  const auto projection = mode == TraceMode::Amnesic || mode == TraceMode::ControlRemove ? ProjectionMode::Amnesic
                                                                                          : ProjectionMode::Mnestic;
  for_each_step(data.x_eval, basis, projection, [&](std::size_t s, const RepresentationMatrix& projected) {
    TraceRecord r = start;
    r.step = static_cast<std::int64_t>(s);
    r.k = basis.step_ends()[s];
    r.probe_accuracy = mode == TraceMode::Amnesic ? probe_at(r.k) : std::nullopt;
    r.downstream_accuracy = head_accuracy(head, projected, data.downstream_eval);
    report.records.push_back(std::move(r));
  });
  return report;
}

// --- commands ---------------------------------------------------------------

void cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir) {
  const auto ds = generate(spec);
  write_matrix(out_dir / "representations.iprb", ds.representations);
  for (auto f : {Feature::Monotonicity, Feature::Relation, Feature::Composite, Feature::Entailment}) {
    const auto name = std::string(feature_name(f));
    write_labels(out_dir / (name + ".csv"), name, ds.labels.feature(f));
  }
  write_manifest(out_dir, {{"command", "synth"},
                           {"spec", spec_json(spec)},
                           {"rows", ds.representations.rows()},
                           {"cols", ds.representations.cols()},
                           {"files",
                            {"representations.iprb", "monotonicity.csv", "relation.csv", "composite.csv",
                             "entailment.csv"}}});
}

RunStatus cmd_inlp(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = prepare_data(cfg);
  InlpConfig ic = cfg.inlp;
  ic.seed = cfg.seed;
  InlpResult result{AccumulatedBasis(data.x_train.cols()), {}};
  bool saturated = false;
  try {
    result = run_inlp(data.x_train, data.y_train, data.x_eval, data.y_eval, ic);
  } catch (const SaturationError& e) {
    result = e.partial();
    saturated = true;
  }

  TraceReport report;
  report.dim = data.x_eval.cols();
  report.saturated = saturated;
  report.hit_max_iters = result.trace.hit_max_iters;
  const double baseline = majority_baseline(data.y_eval);
  for (const auto& s : result.trace.steps) {
    TraceRecord r;
    r.experiment_id = cfg.experiment_id;
    r.model_id = cfg.model_id;
    r.feature = std::string(feature_name(cfg.feature));
    r.mode = TraceMode::Amnesic;
    r.step = static_cast<std::int64_t>(s.step) - 1;
    r.k = s.k_before;
    r.probe_accuracy = s.probe_accuracy;
    r.majority_baseline = baseline;
    r.seed = cfg.seed;
    report.records.push_back(std::move(r));
  }
  const auto stem = trace_file_stem(TraceMode::Amnesic, cfg.seed);
  write_basis(cfg.out / "basis_probe.iprb", result.basis);
  write_report(cfg.out / (stem + ".json"), report);
  write_report_csv(cfg.out / (stem + ".csv"), report);
  write_manifest(cfg.out, {{"command", "inlp"},
                           {"config", config_json(cfg)},
                           {"directions", result.basis.size()},
                           {"steps", result.basis.step_count()},
                           {"saturated", saturated},
                           {"hit_max_iters", result.trace.hit_max_iters}});
  return saturated ? RunStatus::Saturated : RunStatus::Ok;
}

RunStatus cmd_intervene(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = prepare_data(cfg);
  const auto head = obtain_head(cfg, data);
  if (cfg.head_source != HeadSource::File) write_head(cfg.out / "head.ihead", head);

  InlpConfig ic = cfg.inlp;
  ic.seed = cfg.seed;
  InlpResult result{AccumulatedBasis(data.x_train.cols()), {}};
  bool saturated = false;
  try {
    result = run_inlp(data.x_train, data.y_train, data.x_eval, data.y_eval, ic);
  } catch (const SaturationError& e) {
    result = e.partial();
    saturated = true;
  }
  write_basis(cfg.out / "basis_probe.iprb", result.basis);

  struct Job {
    TraceMode mode;
    std::uint64_t seed;
    std::optional<AccumulatedBasis> control;
  };
  std::vector<Job> jobs;
  const auto d = data.x_eval.cols();
  const auto k = result.basis.size();
  for (auto mode : cfg.modes) {
    if (is_projection_mode(mode)) {
      jobs.push_back({mode, cfg.seed, std::nullopt});
      continue;
    }
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const auto seed = cfg.seed + rep;
      AccumulatedBasis control =
          k == 0 ? AccumulatedBasis(d) : random_basis(d, k, seed).regroup(result.basis.step_ends());
      jobs.push_back({mode, seed, std::move(control)});
    }
  }

  std::vector<TraceReport> reports(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& basis = job.control ? *job.control : result.basis;
    reports[i] = build_trace(cfg, job.mode, job.seed, basis, head, data,
                             job.mode == TraceMode::Amnesic ? &result.trace : nullptr);
    reports[i].saturated = saturated;
    reports[i].hit_max_iters = result.trace.hit_max_iters;
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto stem = trace_file_stem(jobs[i].mode, jobs[i].seed);
    write_report(cfg.out / (stem + ".json"), reports[i]);
    write_report_csv(cfg.out / (stem + ".csv"), reports[i]);
    if (jobs[i].control) {
      write_basis(cfg.out / ("basis_control_seed" + std::to_string(jobs[i].seed) + ".iprb"), *jobs[i].control);
    }
  }

  json steps = json::array();
  for (const auto& s : result.trace.steps) {
    steps.push_back({{"step", s.step},
                     {"k_before", s.k_before},
                     {"directions_added", s.directions_added},
                     {"probe_accuracy", s.probe_accuracy}});
  }
  write_manifest(cfg.out, {{"command", "intervene"},
                           {"config", config_json(cfg)},
                           {"directions", k},
                           {"saturated", saturated},
                           {"hit_max_iters", result.trace.hit_max_iters},
                           {"inlp_steps", steps}});
  return saturated ? RunStatus::Saturated : RunStatus::Ok;
}

void cmd_control(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = prepare_data(cfg);
  const auto head = obtain_head(cfg, data);
  const auto d = data.x_eval.cols();
  const auto max_k = std::min(cfg.control_max_k, d);

  std::vector<TraceMode> modes;
  for (auto m : cfg.modes) {
    if (!is_projection_mode(m)) modes.push_back(m);
  }
  if (modes.empty()) modes = {TraceMode::ControlRemove, TraceMode::ControlKeep};

  if (!cfg.probe_basis.empty()) {
    const auto probe = read_basis(cfg.probe_basis);
    if (probe.dim() != d) throw InvalidInput("probe basis dimension does not match representations");
    write_basis(cfg.out / "basis_probe.iprb", probe);
  }

  std::vector<AccumulatedBasis> bases;
  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) bases.push_back(random_basis(d, max_k, cfg.seed + rep));

  std::vector<TraceReport> reports(modes.size() * bases.size());
  parallel_for(reports.size(), cfg.workers, [&](std::size_t i) {
    const auto mode = modes[i / bases.size()];
    const auto rep = i % bases.size();
    reports[i] = build_trace(cfg, mode, cfg.seed + rep, bases[rep], head, data, nullptr);
  });

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto mode = modes[i / bases.size()];
    const auto seed = cfg.seed + i % bases.size();
    const auto stem = trace_file_stem(mode, seed);
    write_report(cfg.out / (stem + ".json"), reports[i]);
    write_report_csv(cfg.out / (stem + ".csv"), reports[i]);
  }
  for (std::size_t rep = 0; rep < bases.size(); ++rep) {
    write_basis(cfg.out / ("basis_control_seed" + std::to_string(cfg.seed + rep) + ".iprb"), bases[rep]);
  }
  write_manifest(cfg.out, {{"command", "control"}, {"config", config_json(cfg)}, {"max_k", max_k}});
}

void cmd_report(const std::vector<fs::path>& trace_dirs, const fs::path& out_dir) {
  if (trace_dirs.empty()) throw InvalidInput("report: no trace directories given");

  std::optional<std::size_t> dim;
  auto check_dim = [&](std::size_t d, const fs::path& source) {
    if (!dim) dim = d;
    if (*dim != d) {
      throw InvalidInput("report: mixed-dimension traces (" + std::to_string(*dim) + " vs " + std::to_string(d) +
                         " in " + source.string() + ")");
    }
  };

  std::string summary = "model,feature,probing_start,probing_delta,downstream_start,downstream_delta\n";
  using CurveKey = std::tuple<std::string, std::string, std::string, std::int64_t>;
  std::map<TraceMode, std::map<CurveKey, Band>> curves;
  std::string alignment = "experiment_id,seed,k,mean_alignment\n";

  for (const auto& dir : trace_dirs) {
    std::string experiment = dir.filename().string();
    std::optional<AccumulatedBasis> probe_basis;
    std::vector<std::pair<std::uint64_t, AccumulatedBasis>> controls;

    for (const auto& path : sorted_entries(dir)) {
      const auto name = path.filename().string();
      if (name.rfind("trace_", 0) == 0 && path.extension() == ".json") {
        const auto report = read_report(path);
        check_dim(report.dim, path);
        if (report.records.empty()) continue;
        experiment = report.records.front().experiment_id;
        for (const auto& r : report.records) {
          auto& band = curves[r.mode][{r.experiment_id, r.model_id, r.feature, r.step}];
          band.k = r.k;
          if (r.downstream_accuracy) band.downstream.push_back(*r.downstream_accuracy);
          if (r.probe_accuracy) band.probe.push_back(*r.probe_accuracy);
        }
        if (report.records.front().mode == TraceMode::Amnesic) {
          const auto& first = report.records.front();
          const auto& last = report.records.back();
          auto delta = [](const std::optional<double>& a, const std::optional<double>& b) -> std::optional<double> {
            if (a && b) return *b - *a;
            return std::nullopt;
          };
          summary += first.model_id + "," + first.feature + "," + opt_csv(first.probe_accuracy) + "," +
                     opt_csv(delta(first.probe_accuracy, last.probe_accuracy)) + "," +
                     opt_csv(first.downstream_accuracy) + "," +
                     opt_csv(delta(first.downstream_accuracy, last.downstream_accuracy)) + "\n";
        }
      } else if (name == "basis_probe.iprb") {
        probe_basis = read_basis(path);
        check_dim(probe_basis->dim(), path);
      } else if (auto seed = control_seed_from_name(name)) {
        controls.emplace_back(*seed, read_basis(path));
        check_dim(controls.back().second.dim(), path);
      }
    }

    if (probe_basis && !controls.empty()) {
      std::sort(controls.begin(), controls.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<AccumulatedBasis> bases;
      for (const auto& c : controls) bases.push_back(c.second);
      std::vector<AlignmentScore> scores(bases.size());
      for (std::size_t i = 0; i < bases.size(); ++i) {
        scores[i] = bases[i].empty() ? AlignmentScore{0.0}
                                     : control_alignment_report(std::span(&bases[i], 1), *probe_basis).front();
      }
      for (std::size_t i = 0; i < bases.size(); ++i) {
        alignment += experiment + "," + std::to_string(controls[i].first) + "," + std::to_string(bases[i].size()) +
                     "," + format_double(scores[i].value) + "\n";
      }
    }
  }

  write_file(out_dir / "summary.csv", summary);
  write_file(out_dir / "alignment.csv", alignment);
  for (const auto& [mode, bands] : curves) {
    std::string csv =
        "experiment_id,model_id,feature,mode,step,k,n,downstream_min,downstream_mean,downstream_max,probe_min,"
        "probe_mean,probe_max\n";
    for (const auto& [key, band] : bands) {
      const auto& [experiment_id, model_id, feature, step] = key;
      csv += experiment_id + "," + model_id + "," + feature + "," + std::string(trace_mode_name(mode)) + "," +
             std::to_string(step) + "," + std::to_string(band.k) + "," +
             std::to_string(std::max(band.downstream.size(), band.probe.size())) + "," + band_cells(band.downstream) +
             "," + band_cells(band.probe) + "\n";
    }
    write_file(out_dir / ("curves_" + std::string(trace_mode_name(mode)) + ".csv"), csv);
  }
}

}  // namespace ivprobe
