#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "fnet/dicom.hpp"
#include "fnet/ingest.hpp"

using namespace fnet;

namespace {

CtSlice make_slice(int rows, int cols, std::vector<std::int16_t> px,
                   double slope = 1.0, double intercept = -1024.0,
                   double z = 0.0) {
  CtSlice s;
  s.rows = rows;
  s.cols = cols;
  s.pixels = std::move(px);
  s.rescale_slope = slope;
  s.rescale_intercept = intercept;
  s.z_position = z;
  return s;
}

void push_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x & 0xFF));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}

void push_short_element(std::vector<std::uint8_t>& v, std::uint16_t group,
                        std::uint16_t element, const char* vr,
                        const std::vector<std::uint8_t>& value) {
  push_u16(v, group);
  push_u16(v, element);
  v.push_back(static_cast<std::uint8_t>(vr[0]));
  v.push_back(static_cast<std::uint8_t>(vr[1]));
  push_u16(v, static_cast<std::uint16_t>(value.size()));
  v.insert(v.end(), value.begin(), value.end());
}

void push_long_element(std::vector<std::uint8_t>& v, std::uint16_t group,
                       std::uint16_t element, const char* vr,
                       const std::vector<std::uint8_t>& value) {
  push_u16(v, group);
  push_u16(v, element);
  v.push_back(static_cast<std::uint8_t>(vr[0]));
  v.push_back(static_cast<std::uint8_t>(vr[1]));
  push_u16(v, 0);
  const auto n = static_cast<std::uint32_t>(value.size());
  for (int i = 0; i < 4; ++i) {
    v.push_back(static_cast<std::uint8_t>((n >> (8 * i)) & 0xFF));
  }
  v.insert(v.end(), value.begin(), value.end());
}

std::vector<std::uint8_t> us_value(std::uint16_t x) {
  return {static_cast<std::uint8_t>(x & 0xFF),
          static_cast<std::uint8_t>(x >> 8)};
}

std::vector<std::uint8_t> ds_value(const std::string& s) {
  std::vector<std::uint8_t> v(s.begin(), s.end());
  if (v.size() % 2) v.push_back(' ');
  return v;
}

}  // namespace

TEST_CASE("hand-built 2x2 file parses to the expected slice") {
  // Constructed element by element per the subset layout, independent of
  // write_dicom_slice.
  std::vector<std::uint8_t> bytes(128, 0);
  bytes.insert(bytes.end(), {'D', 'I', 'C', 'M'});
  push_short_element(bytes, 0x0020, 0x0032, "DS", ds_value("0\\0\\12.5"));
  push_short_element(bytes, 0x0028, 0x0010, "US", us_value(2));
  push_short_element(bytes, 0x0028, 0x0011, "US", us_value(2));
  push_short_element(bytes, 0x0028, 0x0100, "US", us_value(16));
  push_short_element(bytes, 0x0028, 0x0103, "US", us_value(1));
  push_short_element(bytes, 0x0028, 0x1052, "DS", ds_value("-1024"));
  push_short_element(bytes, 0x0028, 0x1053, "DS", ds_value("1"));
  std::vector<std::uint8_t> px;
  for (std::int16_t p : {0, 100, 200, 300}) {
    push_u16(px, static_cast<std::uint16_t>(p));
  }
  push_long_element(bytes, 0x7FE0, 0x0010, "OW", px);

  const CtSlice s = parse_dicom_slice(bytes);
  CHECK(s.rows == 2);
  CHECK(s.cols == 2);
  CHECK(s.pixels == std::vector<std::int16_t>{0, 100, 200, 300});
  CHECK(s.rescale_slope == 1.0);
  CHECK(s.rescale_intercept == -1024.0);
  CHECK(s.z_position == 12.5);
}

TEST_CASE("unknown tags are skipped by declared length") {
  CtSlice s = make_slice(1, 2, {-5, 7}, 2.0, -1000.0, 3.25);
  auto bytes = write_dicom_slice(s);
  // Splice an unknown short element right after the magic.
  std::vector<std::uint8_t> extra;
  push_short_element(extra, 0x0008, 0x0060, "CS", {'C', 'T'});
  bytes.insert(bytes.begin() + 132, extra.begin(), extra.end());
  CHECK(parse_dicom_slice(bytes) == s);
}

TEST_CASE("write then parse is the identity") {
  CtSlice s = make_slice(2, 3, {0, -100, 200, 32767, -32768, 5}, 1.5,
                         -1024.25, -7.125);
  CHECK(parse_dicom_slice(write_dicom_slice(s)) == s);
}

TEST_CASE("write/parse round trip holds for randomized slices") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_int_distribution<int> pix(-32768, 32767);
  std::uniform_real_distribution<double> real(-2000.0, 2000.0);
  for (int it = 0; it < 50; ++it) {
    const int rows = dim(rng), cols = dim(rng);
    std::vector<std::int16_t> px(static_cast<std::size_t>(rows) * cols);
    for (auto& p : px) p = static_cast<std::int16_t>(pix(rng));
    CtSlice s = make_slice(rows, cols, std::move(px), real(rng), real(rng),
                           real(rng));
    if (s.rescale_slope == 0) s.rescale_slope = 1;
    CAPTURE(it);
    CHECK(parse_dicom_slice(write_dicom_slice(s)) == s);
  }
}

TEST_CASE("two writes of the same slice produce identical bytes") {
  const CtSlice s = make_slice(1, 1, {-5});
  CHECK(write_dicom_slice(s) == write_dicom_slice(s));
}

TEST_CASE("1x1 slice writes a 2-byte PixelData payload") {
  const auto bytes = write_dicom_slice(make_slice(1, 1, {-5}));
  // PixelData is the last element: [tag 4][VR 2][reserved 2][u32 len][payload]
  const std::size_t n = bytes.size();
  REQUIRE(n > 14);
  const std::uint32_t len = bytes[n - 6] | (bytes[n - 5] << 8) |
                            (bytes[n - 4] << 16) |
                            (static_cast<std::uint32_t>(bytes[n - 3]) << 24);
  CHECK(len == 2);
}

TEST_CASE("missing magic is rejected") {
  auto bytes = write_dicom_slice(make_slice(1, 1, {0}));
  bytes[128] = 'X';
  bytes[129] = 'X';
  bytes[130] = 'X';
  bytes[131] = 'X';
  CHECK_THROWS_WITH_AS(parse_dicom_slice(bytes), doctest::Contains("DICM"),
                       DicomError);
  try {
    parse_dicom_slice(bytes);
  } catch (const DicomError& e) {
    CHECK(e.code() == DicomErrc::MissingMagic);
  }
}

TEST_CASE("short files and truncated elements are rejected") {
  CHECK_THROWS_AS(parse_dicom_slice(std::vector<std::uint8_t>(64, 0)),
                  DicomError);
  auto bytes = write_dicom_slice(make_slice(2, 2, {1, 2, 3, 4}));
  bytes.resize(bytes.size() - 3);  // cut into PixelData
  try {
    parse_dicom_slice(bytes);
    FAIL("expected DicomError");
  } catch (const DicomError& e) {
    CHECK(e.code() == DicomErrc::TruncatedElement);
  }
}

TEST_CASE("pixel data length must match rows*cols") {
  std::vector<std::uint8_t> bytes(128, 0);
  bytes.insert(bytes.end(), {'D', 'I', 'C', 'M'});
  push_short_element(bytes, 0x0028, 0x0010, "US", us_value(2));
  push_short_element(bytes, 0x0028, 0x0011, "US", us_value(2));
  push_long_element(bytes, 0x7FE0, 0x0010, "OW", {0, 0});  // 1 pixel, need 4
  try {
    parse_dicom_slice(bytes);
    FAIL("expected DicomError");
  } catch (const DicomError& e) {
    CHECK(e.code() == DicomErrc::PixelLengthMismatch);
  }
}

TEST_CASE("unsupported BitsAllocated is rejected") {
  std::vector<std::uint8_t> bytes(128, 0);
  bytes.insert(bytes.end(), {'D', 'I', 'C', 'M'});
  push_short_element(bytes, 0x0028, 0x0100, "US", us_value(8));
  try {
    parse_dicom_slice(bytes);
    FAIL("expected DicomError");
  } catch (const DicomError& e) {
    CHECK(e.code() == DicomErrc::UnsupportedBitsAllocated);
  }
}

TEST_CASE("assemble_volume sorts slices by ascending z") {
  std::vector<CtSlice> slices;
  for (double z : {30.0, 10.0, 20.0}) {
    slices.push_back(make_slice(1, 1, {0}, 1, 0, z));
  }
  const auto vol = assemble_volume("P1", slices);
  REQUIRE(vol.slices.size() == 3);
  CHECK(vol.slices[0].z_position == 10.0);
  CHECK(vol.slices[1].z_position == 20.0);
  CHECK(vol.slices[2].z_position == 30.0);
}

TEST_CASE("assemble_volume ascending-z property under permutations") {
  std::mt19937_64 rng(7);
  std::vector<double> zs = {-5, -1.5, 0, 2.25, 9, 40, 41};
  for (int it = 0; it < 20; ++it) {
    std::shuffle(zs.begin(), zs.end(), rng);
    std::vector<CtSlice> slices;
    for (double z : zs) slices.push_back(make_slice(1, 1, {0}, 1, 0, z));
    const auto vol = assemble_volume("P", slices);
    for (std::size_t i = 1; i < vol.slices.size(); ++i) {
      CHECK(vol.slices[i - 1].z_position < vol.slices[i].z_position);
    }
  }
}

TEST_CASE("assemble_volume degenerate and error cases") {
  CHECK(assemble_volume("P", {make_slice(1, 1, {0})}).slices.size() == 1);

  std::vector<CtSlice> mixed = {make_slice(2, 2, {0, 0, 0, 0}, 1, 0, 0),
                                make_slice(1, 1, {0}, 1, 0, 1)};
  try {
    assemble_volume("P", mixed);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.code() == IngestErrc::DimensionMismatch);
  }

  std::vector<CtSlice> dup = {make_slice(1, 1, {0}, 1, 0, 5),
                              make_slice(1, 1, {1}, 1, 0, 5)};
  try {
    assemble_volume("P", dup);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.code() == IngestErrc::DuplicateZ);
  }
}

TEST_CASE("metadata csv: single row maps fields directly") {
  const auto records = parse_metadata_csv(
      "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus\n"
      "P1,0,3000,75.5,67,Male,Ex-smoker\n");
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.patient_id == "P1");
  CHECK(r.age == 67);
  CHECK(r.sex == Sex::Male);
  CHECK(r.smoking == Smoking::ExSmoker);
  REQUIRE(r.visits.size() == 1);
  CHECK(r.visits[0].week == 0);
  CHECK(r.visits[0].fvc_ml == 3000.0);
  CHECK(r.visits[0].percent == 75.5);
}

TEST_CASE("metadata csv: visits are sorted by week") {
  const auto records = parse_metadata_csv(
      "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus\n"
      "P1,12,2800,70,67,Male,Ex-smoker\n"
      "P1,0,3000,75.5,67,Male,Ex-smoker\n");
  REQUIRE(records.size() == 1);
  REQUIRE(records[0].visits.size() == 2);
  CHECK(records[0].visits[0].week == 0);
  CHECK(records[0].visits[1].week == 12);
}

TEST_CASE("metadata csv: row order does not change the parsed records") {
  const std::vector<std::string> rows = {
      "P1,0,3000,75.5,67,Male,Ex-smoker",
      "P1,12,2800,70,67,Male,Ex-smoker",
      "P2,0,2200,61,71,Female,Never smoked",
      "P2,24,2000,55,71,Female,Never smoked",
      "P3,6,2600,68,59,Male,Currently smokes",
  };
  auto build = [](const std::vector<std::string>& rs) {
    std::string text = "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus\n";
    for (const auto& r : rs) text += r + "\n";
    auto recs = parse_metadata_csv(text);
    std::sort(recs.begin(), recs.end(),
              [](const PatientRecord& a, const PatientRecord& b) {
                return a.patient_id < b.patient_id;
              });
    return recs;
  };
  const auto baseline = build(rows);
  std::mt19937_64 rng(3);
  auto shuffled = rows;
  for (int it = 0; it < 10; ++it) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(build(shuffled) == baseline);
  }
}

TEST_CASE("metadata csv error cases") {
  CHECK_THROWS_AS(parse_metadata_csv("Patient,Weeks\nP1,0\n"), IngestError);
  try {
    parse_metadata_csv(
        "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus\n"
        "P1,0,3000,75.5,67,Male,Vaper\n");
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.code() == IngestErrc::BadEnum);
  }
  try {
    parse_metadata_csv(
        "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus\n"
        "P1,zero,3000,75.5,67,Male,Ex-smoker\n");
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.code() == IngestErrc::NonNumericField);
  }
}

TEST_CASE("metadata csv: demographics come from the first row per patient") {
  std::vector<std::string> warnings;
  const auto records = parse_metadata_csv(
      "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus\n"
      "P1,0,3000,75.5,67,Male,Ex-smoker\n"
      "P1,12,2800,70,68,Female,Never smoked\n",
      &warnings);
  REQUIRE(records.size() == 1);
  CHECK(records[0].age == 67);
  CHECK(records[0].sex == Sex::Male);
  CHECK(records[0].smoking == Smoking::ExSmoker);
  CHECK(!warnings.empty());
}
