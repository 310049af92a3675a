#pragma once

// On-disk formats. All binary payloads are little-endian IEEE-754 single
// precision, row-major, independent of host byte order.
//
//   MatrixFile  "IPRB" | u32 version=1 | u64 rows | u64 cols | f32[rows*cols]
//   LabelFile   "example_id,<feature>\n" then "<id>,<class>\n", ids 0..n-1
//   HeadFile    text header (see write_head) then f32 weights+bias per layer
//   TraceReport JSON document plus a flat CSV projection of its records

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ivprobe/head.hpp"
#include "ivprobe/linalg.hpp"
#include "ivprobe/probe.hpp"

namespace ivprobe {

inline constexpr std::uint32_t kMatrixFormatVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 24;

// --- matrices ---------------------------------------------------------------

/// Encodes any finite matrix (zero rows allowed). Values are rounded to the
/// nearest single-precision float; magnitudes beyond float range are rejected.
std::string encode_matrix(const Matrix& m);
/// Decodes a complete MatrixFile image. Throws ParseError naming the offset.
Matrix decode_matrix(std::string_view bytes);

void write_matrix(const std::filesystem::path& path, const RepresentationMatrix& x);
RepresentationMatrix read_matrix(const std::filesystem::path& path);

// --- labels -----------------------------------------------------------------

struct LabelColumn {
  std::string feature;
  std::vector<std::uint32_t> values;
};

std::string encode_labels(std::string_view feature, const std::vector<std::uint32_t>& values);
LabelColumn decode_labels(std::string_view text);

void write_labels(const std::filesystem::path& path, std::string_view feature, const LabelVector& y);
LabelColumn read_labels(const std::filesystem::path& path);

// --- heads ------------------------------------------------------------------

std::string encode_head(const ClassifierHead& head);
ClassifierHead decode_head(std::string_view bytes);

void write_head(const std::filesystem::path& path, const ClassifierHead& head);
ClassifierHead read_head(const std::filesystem::path& path);

// --- bases ------------------------------------------------------------------

/// A basis is stored as a MatrixFile of its directions at `path` and its step
/// ends, one per line, at `path` with ".steps" appended.
void write_basis(const std::filesystem::path& path, const AccumulatedBasis& basis);
AccumulatedBasis read_basis(const std::filesystem::path& path);

// --- trace reports ----------------------------------------------------------

enum class TraceMode { Amnesic, Mnestic, ControlRemove, ControlKeep };

std::string_view trace_mode_name(TraceMode m) noexcept;
/// Throws InvalidInput on an unknown name.
TraceMode parse_trace_mode(std::string_view name);

struct TraceRecord {
  std::string experiment_id;
  std::string model_id;
  std::string feature;
  TraceMode mode = TraceMode::Amnesic;
  std::int64_t step = -1;  // -1 is the unintervened representation
  std::size_t k = 0;
  std::optional<double> probe_accuracy;
  double majority_baseline = 0.0;
  std::optional<double> downstream_accuracy;
  std::uint64_t seed = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct TraceReport {
  std::size_t dim = 0;
  bool saturated = false;
  bool hit_max_iters = false;
  std::vector<TraceRecord> records;

  bool operator==(const TraceReport&) const = default;

  /// Sorts records by (mode, seed, step).
  void sort_records();
};

inline constexpr std::string_view kTraceCsvHeader =
    "experiment_id,model_id,feature,mode,step,k,probe_accuracy,majority_baseline,downstream_accuracy,seed";

/// Serializes with records sorted by (mode, seed, step).
std::string encode_report(const TraceReport& report);
/// Validates field types, record ordering and the presence of a step -1
/// record for every (mode, seed) group. Throws ParseError naming the record and field.
TraceReport decode_report(std::string_view json);
std::string encode_report_csv(const TraceReport& report);

void write_report(const std::filesystem::path& path, const TraceReport& report);
void write_report_csv(const std::filesystem::path& path, const TraceReport& report);
TraceReport read_report(const std::filesystem::path& path);

// --- helpers ----------------------------------------------------------------

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ivprobe
