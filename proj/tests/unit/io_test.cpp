#include <bit>
#include <cstring>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ivprobe/errors.hpp"
#include "ivprobe/interventions.hpp"
#include "ivprobe/io.hpp"
#include "oracles.hpp"

using namespace ivprobe;

namespace {

std::string hex(std::string_view bytes) {
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : bytes) {
    if (!out.empty()) out.push_back(' ');
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

template <class Fn>
std::uint64_t parse_offset(Fn&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no ParseError thrown";
  return ~std::uint64_t{0};
}

// Matrix rounded to single precision, the only values a MatrixFile can hold.
Matrix as_float(const Matrix& m) { return m.cast<float>().cast<double>(); }

TraceRecord record(TraceMode mode, std::uint64_t seed, std::int64_t step) {
  TraceRecord r;
  r.experiment_id = "exp";
  r.model_id = "m";
  r.feature = "composite";
  r.mode = mode;
  r.seed = seed;
  r.step = step;
  r.k = step < 0 ? 0 : static_cast<std::size_t>(step + 1) * 2;
  r.majority_baseline = 0.25;
  r.downstream_accuracy = 0.5 + 0.01 * static_cast<double>(step + 1);
  if (mode == TraceMode::Amnesic) r.probe_accuracy = 0.9 - 0.1 * static_cast<double>(step + 1);
  return r;
}

}  // namespace

TEST(MatrixFile, OneByOneBytes) {
  Matrix m(1, 1);
  m(0, 0) = 1.0;
  EXPECT_EQ(hex(encode_matrix(m)),
            "49 50 52 42 01 00 00 00 01 00 00 00 00 00 00 00 01 00 00 00 00 00 00 00 00 00 80 3F");
}

TEST(MatrixFile, SeededRoundTripIsByteIdentical) {
  const Matrix m = as_float(oracle::gaussian_matrix(7, 5, 42));
  const auto bytes = encode_matrix(m);
  EXPECT_EQ(bytes.size(), kMatrixHeaderBytes + 7 * 5 * 4);
  const Matrix back = decode_matrix(bytes);
  EXPECT_EQ(back, m);
  EXPECT_EQ(encode_matrix(back), bytes);
}

TEST(MatrixFile, RoundsToNearestFloat) {
  Matrix m(1, 3);
  m << 0.1, 1.0 + 1e-12, -3.5;
  const Matrix back = decode_matrix(encode_matrix(m));
  EXPECT_EQ(back(0, 0), static_cast<double>(0.1f));
  EXPECT_EQ(back(0, 1), 1.0);
  EXPECT_EQ(back(0, 2), -3.5);
}

TEST(MatrixFile, ParseErrorsNameOffsets) {
  auto good = encode_matrix(Matrix::Ones(2, 3));
  auto bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  EXPECT_EQ(parse_offset([&] { decode_matrix(bad_magic); }), 0u);

  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(parse_offset([&] { decode_matrix(bad_version); }), 4u);

  auto truncated = good.substr(0, good.size() - 1);
  EXPECT_EQ(parse_offset([&] { decode_matrix(truncated); }), truncated.size());
  EXPECT_EQ(parse_offset([&] { decode_matrix(good.substr(0, 10)); }), 10u);

  EXPECT_EQ(parse_offset([&] { decode_matrix(good + "x"); }), good.size());
}

TEST(MatrixFile, RejectsNonFinite) {
  Matrix m = Matrix::Ones(1, 2);
  m(0, 1) = 1e300;
  EXPECT_THROW(encode_matrix(m), InvalidInput);
  auto bytes = encode_matrix(Matrix::Ones(1, 1));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + kMatrixHeaderBytes, &nan, 4);
  EXPECT_THROW(decode_matrix(bytes), ParseError);
}

TEST(MatrixFile, FileRoundTrip) {
  oracle::TempDir dir("io");
  RepresentationMatrix x(as_float(oracle::gaussian_matrix(9, 4, 1)));
  write_matrix(dir.path() / "x.iprb", x);
  EXPECT_EQ(read_matrix(dir.path() / "x.iprb").values(), x.values());
  write_file(dir.path() / "empty.iprb", encode_matrix(Matrix(0, 4)));
  EXPECT_THROW(read_matrix(dir.path() / "empty.iprb"), ParseError);
  EXPECT_THROW(read_matrix(dir.path() / "missing.iprb"), InvalidInput);
}

TEST(LabelFile, Format) {
  EXPECT_EQ(encode_labels("relation", {2, 0, 1}), "example_id,relation\n0,2\n1,0\n2,1\n");
  auto col = decode_labels("example_id,relation\n0,2\n1,0\n2,1\n");
  EXPECT_EQ(col.feature, "relation");
  EXPECT_EQ(col.values, (std::vector<std::uint32_t>{2, 0, 1}));
  EXPECT_TRUE(decode_labels("example_id,x\n").values.empty());
}

TEST(LabelFile, Errors) {
  EXPECT_THROW(decode_labels(""), ParseError);
  EXPECT_THROW(decode_labels("id,relation\n0,1\n"), ParseError);
  EXPECT_EQ(parse_offset([] { decode_labels("example_id,r\n0,1\n2,1\n"); }), 3u);
  EXPECT_EQ(parse_offset([] { decode_labels("example_id,r\n0,-1\n"); }), 2u);
  EXPECT_THROW(decode_labels("example_id,r\n0,1\n\n"), ParseError);
  EXPECT_THROW(decode_labels("example_id,r\n0,1\ngarbage"), ParseError);
  EXPECT_THROW(encode_labels("a,b", {0}), InvalidInput);
}

TEST(LabelFile, FileRoundTrip) {
  oracle::TempDir dir("labels");
  LabelVector y({1, 0, 1, 1}, 2);
  write_labels(dir.path() / "m.csv", "monotonicity", y);
  auto col = read_labels(dir.path() / "m.csv");
  EXPECT_EQ(col.feature, "monotonicity");
  EXPECT_EQ(col.values, y.values());
}

TEST(HeadFile, RoundTripIsBitExact) {
  ClassifierHead head({DenseLayer{as_float(oracle::gaussian_matrix(6, 4, 1)),
                                  as_float(oracle::gaussian_matrix(6, 1, 2)).col(0), Activation::Tanh},
                       DenseLayer{as_float(oracle::gaussian_matrix(3, 6, 3)),
                                  as_float(oracle::gaussian_matrix(3, 1, 4)).col(0), Activation::Identity}});
  const auto bytes = encode_head(head);
  EXPECT_EQ(bytes.substr(0, 43), "IPRB-HEAD 1\nlayers 2\n4 6 tanh\n6 3 identity\n");
  const auto back = decode_head(bytes);
  ASSERT_EQ(back.layers().size(), 2u);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(back.layers()[l].weights, head.layers()[l].weights);
    EXPECT_EQ(back.layers()[l].bias, head.layers()[l].bias);
    EXPECT_EQ(back.layers()[l].activation, head.layers()[l].activation);
  }
  EXPECT_EQ(encode_head(back), bytes);
  EXPECT_EQ(bytes.size(), std::string("IPRB-HEAD 1\nlayers 2\n4 6 tanh\n6 3 identity\npayload\n").size() +
                              4 * (6 * 4 + 6 + 3 * 6 + 3));
}

TEST(HeadFile, Errors) {
  ClassifierHead head({DenseLayer{Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity}});
  const auto good = encode_head(head);
  EXPECT_THROW(decode_head("IPRB-HEAD 2\n"), ParseError);
  EXPECT_THROW(decode_head(good + "!"), ParseError);
  EXPECT_THROW(decode_head(good.substr(0, good.size() - 2)), ParseError);
  EXPECT_THROW(decode_head("IPRB-HEAD 1\nlayers 1\n2 2 relu\npayload\n"), ParseError);
  // Last activation must be identity.
  EXPECT_THROW(decode_head("IPRB-HEAD 1\nlayers 1\n1 2 tanh\npayload\n" + std::string(12, '\0')), ParseError);
  // Dimension chaining.
  EXPECT_THROW(decode_head("IPRB-HEAD 1\nlayers 2\n1 2 tanh\n3 2 identity\npayload\n" + std::string(48, '\0')),
               ParseError);
}

TEST(BasisFile, RoundTrip) {
  oracle::TempDir dir("basis");
  auto b = random_basis(30, 6, 3).regroup({2, 5, 6});
  write_basis(dir.path() / "b.iprb", b);
  auto back = read_basis(dir.path() / "b.iprb");
  EXPECT_EQ(back.step_ends(), b.step_ends());
  EXPECT_EQ(back.directions(), as_float(b.directions()));
  EXPECT_EQ(read_file(dir.path() / "b.iprb.steps"), "2\n5\n6\n");
}

TEST(TraceReport, CsvHeader) {
  EXPECT_EQ(kTraceCsvHeader,
            "experiment_id,model_id,feature,mode,step,k,probe_accuracy,majority_baseline,downstream_accuracy,seed");
  TraceReport r;
  r.dim = 4;
  r.records.push_back(record(TraceMode::Mnestic, 3, -1));
  const auto csv = encode_report_csv(r);
  EXPECT_EQ(csv, std::string(kTraceCsvHeader) + "\nexp,m,composite,mnestic,-1,0,,0.25,0.5,3\n");
}

TEST(TraceReport, StartOnlyRoundTrip) {
  TraceReport r;
  r.dim = 8;
  r.records.push_back(record(TraceMode::Amnesic, 0, -1));
  EXPECT_EQ(decode_report(encode_report(r)), r);
}

TEST(TraceReport, OrderingAndValuesRoundTrip) {
  TraceReport r;
  r.dim = 16;
  r.saturated = true;
  for (auto mode : {TraceMode::Amnesic, TraceMode::Mnestic, TraceMode::ControlRemove, TraceMode::ControlKeep}) {
    for (std::uint64_t seed : {0u, 7u}) {
      for (std::int64_t step = -1; step < 3; ++step) r.records.push_back(record(mode, seed, step));
    }
  }
  r.records[1].downstream_accuracy = 1.0 / 3.0;
  r.records[2].downstream_accuracy.reset();
  const auto text = encode_report(r);
  const auto back = decode_report(text);
  EXPECT_EQ(back, r);
  EXPECT_EQ(encode_report(back), text);
  EXPECT_EQ(encode_report_csv(back), encode_report_csv(r));
}

TEST(TraceReport, EncodeSortsRecords) {
  TraceReport r;
  r.dim = 2;
  r.records = {record(TraceMode::Mnestic, 0, 0), record(TraceMode::Amnesic, 0, -1), record(TraceMode::Mnestic, 0, -1)};
  auto back = decode_report(encode_report(r));
  ASSERT_EQ(back.records.size(), 3u);
  EXPECT_EQ(back.records[0].mode, TraceMode::Amnesic);
  EXPECT_EQ(back.records[1].step, -1);
  EXPECT_EQ(back.records[2].step, 0);
}

TEST(TraceReport, SchemaErrorsNameTheField) {
  TraceReport r;
  r.dim = 2;
  r.records = {record(TraceMode::Amnesic, 0, -1), record(TraceMode::Amnesic, 0, 0)};
  const std::string good = encode_report(r);
  auto expect_field = [](const std::string& text, const std::string& field) {
    try {
      decode_report(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  // Fields are written as "key": value.
  auto spaced = [](std::string t) {
    const auto colon = t.find("\":");
    if (colon != std::string::npos) t.insert(colon + 2, " ");
    return t;
  };
  auto edit = [&](const std::string& raw_from, const std::string& raw_to) {
    const auto from = spaced(raw_from);
    const auto to = spaced(raw_to);
    auto s = good;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    s.replace(at, from.size(), to);
    return s;
  };
  expect_field(edit("\"mode\":\"amnesic\"", "\"mode\":\"sideways\""), "mode");
  expect_field(edit("\"majority_baseline\":0.25", "\"majority_baseline\":1.5"), "majority_baseline");
  expect_field(edit("\"seed\":0", "\"seed\":-1"), "seed");
  expect_field(edit("\"step\":-1", "\"step\":5"), "step");
  expect_field(edit("\"format\":\"ivprobe-trace\"", "\"format\":\"other\""), "format");
  expect_field(edit("\"k\":0", "\"k\":\"zero\""), "k");
  expect_field(good + "x", "JSON");
}

TEST(TraceReport, FileRoundTrip) {
  oracle::TempDir dir("trace");
  TraceReport r;
  r.dim = 3;
  r.records = {record(TraceMode::ControlKeep, 1, -1), record(TraceMode::ControlKeep, 1, 0)};
  write_report(dir.path() / "t.json", r);
  write_report_csv(dir.path() / "t.csv", r);
  EXPECT_EQ(read_report(dir.path() / "t.json"), r);
  EXPECT_EQ(read_file(dir.path() / "t.csv"), encode_report_csv(r));
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 0.6525, 1e-300, 123456789.125}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
}
