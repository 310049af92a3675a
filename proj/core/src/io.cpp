#include "ivprobe/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ivprobe/errors.hpp"

namespace ivprobe {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "IPRB";
constexpr std::string_view kHeadMagic = "IPRB-HEAD";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, double v) {
  if (!std::isfinite(v)) throw InvalidInput("cannot store a non-finite value");
  if (std::fabs(v) > static_cast<double>(std::numeric_limits<float>::max())) {
    throw InvalidInput("value exceeds single-precision range");
  }
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

float get_f32(std::string_view bytes, std::size_t offset) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, offset, 4)));
}

// Reads f32 values into `m`, returning the offset after them.
std::size_t read_f32_block(std::string_view bytes, std::size_t offset, Eigen::Index rows, Eigen::Index cols,
                           Matrix& m) {
  m.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const float v = get_f32(bytes, offset);
      if (!std::isfinite(v)) throw ParseError("non-finite matrix value", offset);
      m(r, c) = static_cast<double>(v);
      offset += 4;
    }
  }
  return offset;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

template <class T>
bool parse_uint(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

int mode_rank(TraceMode m) { return static_cast<int>(m); }

auto record_key(const TraceRecord& r) { return std::make_tuple(mode_rank(r.mode), r.seed, r.step); }

}  // namespace

// --- matrices ---------------------------------------------------------------

std::string encode_matrix(const Matrix& m) {
  std::string out;
  out.reserve(kMatrixHeaderBytes + static_cast<std::size_t>(m.size()) * 4);
  out.append(kMagic);
  put_u32(out, kMatrixFormatVersion);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, m(r, c));
  return out;
}

Matrix decode_matrix(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ParseError("bad matrix magic", 0);
  }
  if (bytes.size() < kMatrixHeaderBytes) throw ParseError("truncated matrix header", bytes.size());
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kMatrixFormatVersion) {
    throw ParseError("unsupported matrix format version " + std::to_string(version), 4);
  }
  const auto rows = get_le(bytes, 8, 8);
  const auto cols = get_le(bytes, 16, 8);
  const auto max_cells = (bytes.size() - kMatrixHeaderBytes) / 4;
  if (cols != 0 && rows > max_cells / cols) {
    throw ParseError("truncated matrix payload", bytes.size());
  }
  const auto expected = kMatrixHeaderBytes + rows * cols * 4;
  if (bytes.size() < expected) throw ParseError("truncated matrix payload", bytes.size());
  if (bytes.size() > expected) throw ParseError("trailing bytes after matrix payload", expected);
  Matrix m;
  read_f32_block(bytes, kMatrixHeaderBytes, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), m);
  return m;
}

void write_matrix(const std::filesystem::path& path, const RepresentationMatrix& x) {
  write_file(path, encode_matrix(x.values()));
}

RepresentationMatrix read_matrix(const std::filesystem::path& path) {
  Matrix m = decode_matrix(read_file(path));
  if (m.rows() == 0 || m.cols() == 0) throw ParseError("matrix file " + path.string() + " is empty", 8);
  return RepresentationMatrix(std::move(m));
}

// --- labels -----------------------------------------------------------------

std::string encode_labels(std::string_view feature, const std::vector<std::uint32_t>& values) {
  if (feature.empty() || feature.find_first_of(",\n\r") != std::string_view::npos) {
    throw InvalidInput("label feature name must be non-empty and contain no comma or newline");
  }
  std::string out = "example_id,";
  out.append(feature);
  out.push_back('\n');
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i);
    out.push_back(',');
    out += std::to_string(values[i]);
    out.push_back('\n');
  }
  return out;
}

LabelColumn decode_labels(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty label file", 1);
  const auto header = split_fields(lines[0], ',');
  if (header.size() != 2 || header[0] != "example_id" || header[1].empty()) {
    throw ParseError("label header must be 'example_id,<feature_name>'", 1);
  }
  LabelColumn col{std::string(header[1]), {}};
  col.values.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i], ',');
    std::uint64_t id = 0;
    std::uint32_t cls = 0;
    if (fields.size() != 2 || !parse_uint(fields[0], id) || !parse_uint(fields[1], cls)) {
      throw ParseError("malformed label row '" + std::string(lines[i]) + "'", i + 1);
    }
    if (id != i - 1) throw ParseError("example ids must be contiguous from 0", i + 1);
    col.values.push_back(cls);
  }
  return col;
}

void write_labels(const std::filesystem::path& path, std::string_view feature, const LabelVector& y) {
  write_file(path, encode_labels(feature, y.values()));
}

LabelColumn read_labels(const std::filesystem::path& path) { return decode_labels(read_file(path)); }

// --- heads ------------------------------------------------------------------
//
//   IPRB-HEAD 1
//   layers <L>
//   <in> <out> <identity|tanh>      (L lines)
//   payload
//   <f32 weights out x in, f32 bias out> per layer

std::string encode_head(const ClassifierHead& head) {
  std::string out;
  out.append(kHeadMagic);
  out += " 1\nlayers " + std::to_string(head.layers().size()) + "\n";
  for (const auto& l : head.layers()) {
    out += std::to_string(l.in_dim()) + " " + std::to_string(l.out_dim()) + " ";
    out.append(activation_name(l.activation));
    out.push_back('\n');
  }
  out += "payload\n";
  for (const auto& l : head.layers()) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_f32(out, l.weights(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f32(out, l.bias(r));
  }
  return out;
}

ClassifierHead decode_head(std::string_view bytes) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw ParseError("truncated head header", pos);
    auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };

  if (bytes.substr(0, kHeadMagic.size()) != kHeadMagic) throw ParseError("bad head magic", 0);
  if (next_line() != "IPRB-HEAD 1") throw ParseError("unsupported head format version", kHeadMagic.size());

  const auto layer_line_offset = pos;
  const auto layer_line = split_fields(next_line(), ' ');
  std::size_t layer_count = 0;
  if (layer_line.size() != 2 || layer_line[0] != "layers" || !parse_uint(layer_line[1], layer_count) ||
      layer_count == 0) {
    throw ParseError("expected 'layers <count>'", layer_line_offset);
  }

  struct Shape {
    std::size_t in = 0, out = 0;
    Activation activation = Activation::Identity;
  };
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < layer_count; ++i) {
    const auto offset = pos;
    const auto f = split_fields(next_line(), ' ');
    Shape s;
    if (f.size() != 3 || !parse_uint(f[0], s.in) || !parse_uint(f[1], s.out) || s.in == 0 || s.out == 0) {
      throw ParseError("malformed layer shape line", offset);
    }
    if (f[2] == "tanh") {
      s.activation = Activation::Tanh;
    } else if (f[2] != "identity") {
      throw ParseError("unknown activation '" + std::string(f[2]) + "'", offset);
    }
    shapes.push_back(s);
  }
  const auto payload_offset = pos;
  if (next_line() != "payload") throw ParseError("expected 'payload'", payload_offset);

  std::uint64_t expected = pos;
  for (const auto& s : shapes) expected += (s.in * s.out + s.out) * 4;
  if (bytes.size() < expected) throw ParseError("truncated head payload", bytes.size());
  if (bytes.size() > expected) throw ParseError("trailing bytes after head payload", expected);

  std::vector<DenseLayer> layers;
  for (const auto& s : shapes) {
    DenseLayer l;
    l.activation = s.activation;
    pos = read_f32_block(bytes, pos, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in), l.weights);
    Matrix b;
    pos = read_f32_block(bytes, pos, static_cast<Eigen::Index>(s.out), 1, b);
    l.bias = b.col(0);
    layers.push_back(std::move(l));
  }
  try {
    return ClassifierHead(std::move(layers));
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("invalid head: ") + e.what(), layer_line_offset);
  }
}

void write_head(const std::filesystem::path& path, const ClassifierHead& head) {
  write_file(path, encode_head(head));
}

ClassifierHead read_head(const std::filesystem::path& path) { return decode_head(read_file(path)); }

// --- bases ------------------------------------------------------------------

void write_basis(const std::filesystem::path& path, const AccumulatedBasis& basis) {
  write_file(path, encode_matrix(basis.directions()));
  std::string steps;
  for (auto e : basis.step_ends()) steps += std::to_string(e) + "\n";
  write_file(path.string() + ".steps", steps);
}

AccumulatedBasis read_basis(const std::filesystem::path& path) {
  Matrix dirs = decode_matrix(read_file(path));
  if (dirs.cols() == 0) throw ParseError("basis file " + path.string() + " has zero columns", 16);
  std::vector<std::size_t> ends;
  const auto text = read_file(path.string() + ".steps");
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t e = 0;
    if (!parse_uint(lines[i], e)) throw ParseError("malformed step boundary", i + 1);
    ends.push_back(e);
  }
  // Stored in single precision, so orthonormality holds only to float rounding.
  return AccumulatedBasis::from_directions(std::move(dirs), std::move(ends), 1e-5);
}

// --- trace reports ----------------------------------------------------------

std::string_view trace_mode_name(TraceMode m) noexcept {
  switch (m) {
    case TraceMode::Amnesic: return "amnesic";
    case TraceMode::Mnestic: return "mnestic";
    case TraceMode::ControlRemove: return "control-remove";
    case TraceMode::ControlKeep: return "control-keep";
  }
  return "unknown";
}

TraceMode parse_trace_mode(std::string_view name) {
  for (auto m : {TraceMode::Amnesic, TraceMode::Mnestic, TraceMode::ControlRemove, TraceMode::ControlKeep}) {
    if (trace_mode_name(m) == name) return m;
  }
  throw InvalidInput("unknown mode '" + std::string(name) + "'");
}

void TraceReport::sort_records() {
  std::stable_sort(records.begin(), records.end(),
                   [](const TraceRecord& a, const TraceRecord& b) { return record_key(a) < record_key(b); });
}

std::string encode_report(const TraceReport& report) {
  TraceReport sorted = report;
  sorted.sort_records();
  json records = json::array();
  for (const auto& r : sorted.records) {
    records.push_back({
        {"experiment_id", r.experiment_id},
        {"model_id", r.model_id},
        {"feature", r.feature},
        {"mode", trace_mode_name(r.mode)},
        {"step", r.step},
        {"k", r.k},
        {"probe_accuracy", r.probe_accuracy ? json(*r.probe_accuracy) : json(nullptr)},
        {"majority_baseline", r.majority_baseline},
        {"downstream_accuracy", r.downstream_accuracy ? json(*r.downstream_accuracy) : json(nullptr)},
        {"seed", r.seed},
    });
  }
  json doc = {
      {"format", "ivprobe-trace"},
      {"version", 1},
      {"dim", sorted.dim},
      {"saturated", sorted.saturated},
      {"hit_max_iters", sorted.hit_max_iters},
      {"records", std::move(records)},
  };
  return doc.dump(2) + "\n";
}

TraceReport decode_report(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("trace report is not valid JSON: ") + e.what(), e.byte);
  }
  auto field = [](const json& obj, const char* name, std::size_t index) -> const json& {
    if (!obj.is_object() || !obj.contains(name)) {
      throw ParseError(std::string("missing field '") + name + "'", index);
    }
    return obj.at(name);
  };
  auto wrong = [](const char* name, const char* want, std::size_t index) {
    return ParseError(std::string("field '") + name + "' must be " + want, index);
  };

  if (!doc.is_object()) throw ParseError("trace report must be a JSON object", 0);
  if (field(doc, "format", 0) != "ivprobe-trace") throw wrong("format", "\"ivprobe-trace\"", 0);
  if (field(doc, "version", 0) != 1) throw wrong("version", "1", 0);

  TraceReport report;
  const auto& dim = field(doc, "dim", 0);
  if (!dim.is_number_unsigned()) throw wrong("dim", "a non-negative integer", 0);
  report.dim = dim.get<std::size_t>();
  const auto& sat = field(doc, "saturated", 0);
  const auto& hit = field(doc, "hit_max_iters", 0);
  if (!sat.is_boolean()) throw wrong("saturated", "a boolean", 0);
  if (!hit.is_boolean()) throw wrong("hit_max_iters", "a boolean", 0);
  report.saturated = sat.get<bool>();
  report.hit_max_iters = hit.get<bool>();

  const auto& records = field(doc, "records", 0);
  if (!records.is_array()) throw wrong("records", "an array", 0);
  constexpr std::size_t kFieldCount = 10;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& j = records[i];
    if (!j.is_object() || j.size() != kFieldCount) {
      throw ParseError("record must have exactly " + std::to_string(kFieldCount) + " fields", i);
    }
    TraceRecord r;
    auto str = [&](const char* name) {
      const auto& v = field(j, name, i);
      if (!v.is_string()) throw wrong(name, "a string", i);
      return v.get<std::string>();
    };
    auto accuracy = [&](const char* name, bool nullable) -> std::optional<double> {
      const auto& v = field(j, name, i);
      if (v.is_null() && nullable) return std::nullopt;
      if (!v.is_number()) throw wrong(name, "a number", i);
      const double a = v.get<double>();
      if (!(a >= 0.0 && a <= 1.0)) throw wrong(name, "in [0, 1]", i);
      return a;
    };
    r.experiment_id = str("experiment_id");
    r.model_id = str("model_id");
    r.feature = str("feature");
    try {
      r.mode = parse_trace_mode(str("mode"));
    } catch (const InvalidInput&) {
      throw wrong("mode", "one of amnesic, mnestic, control-remove, control-keep", i);
    }
    const auto& step = field(j, "step", i);
    if (!step.is_number_integer() || step.get<std::int64_t>() < -1) throw wrong("step", "an integer >= -1", i);
    r.step = step.get<std::int64_t>();
    const auto& k = field(j, "k", i);
    if (!k.is_number_unsigned()) throw wrong("k", "a non-negative integer", i);
    r.k = k.get<std::size_t>();
    r.probe_accuracy = accuracy("probe_accuracy", true);
    r.majority_baseline = *accuracy("majority_baseline", false);
    r.downstream_accuracy = accuracy("downstream_accuracy", true);
    const auto& seed = field(j, "seed", i);
    if (!seed.is_number_unsigned()) throw wrong("seed", "a non-negative integer", i);
    r.seed = seed.get<std::uint64_t>();

    if (i > 0 && record_key(r) < record_key(report.records.back())) {
      throw ParseError("records are not sorted by (mode, seed, step)", i);
    }
    const bool new_group = i == 0 || r.mode != report.records.back().mode || r.seed != report.records.back().seed;
    if (new_group && r.step != -1) throw wrong("step", "-1 for the first record of each (mode, seed)", i);
    report.records.push_back(std::move(r));
  }
  return report;
}

std::string encode_report_csv(const TraceReport& report) {
  TraceReport sorted = report;
  sorted.sort_records();
  std::string out(kTraceCsvHeader);
  out.push_back('\n');
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : sorted.records) {
    out += r.experiment_id + "," + r.model_id + "," + r.feature + "," + std::string(trace_mode_name(r.mode)) +
           "," + std::to_string(r.step) + "," + std::to_string(r.k) + "," + opt(r.probe_accuracy) + "," +
           format_double(r.majority_baseline) + "," + opt(r.downstream_accuracy) + "," + std::to_string(r.seed) +
           "\n";
  }
  return out;
}

void write_report(const std::filesystem::path& path, const TraceReport& report) {
  write_file(path, encode_report(report));
}

void write_report_csv(const std::filesystem::path& path, const TraceReport& report) {
  write_file(path, encode_report_csv(report));
}

TraceReport read_report(const std::filesystem::path& path) { return decode_report(read_file(path)); }

// --- helpers ----------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("failed to format number");
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("failed writing " + path.string());
}

}  // namespace ivprobe
