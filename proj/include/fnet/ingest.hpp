#ifndef FNET_INGEST_HPP
#define FNET_INGEST_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "fnet/dicom.hpp"

namespace fnet {

enum class IngestErrc {
  DimensionMismatch,
  DuplicateZ,
  EmptyInput,
  BadHeader,
  BadEnum,
  NonNumericField,
};

class IngestError : public std::runtime_error {
 public:
  IngestError(IngestErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  IngestErrc code() const { return code_; }

 private:
  IngestErrc code_;
};

// Slices sorted by strictly increasing z, all sharing rows/cols.
struct CtVolume {
  std::string patient_id;
  std::vector<CtSlice> slices;

  bool operator==(const CtVolume&) const = default;
};

enum class Sex { Male, Female };
enum class Smoking { CurrentlySmokes, ExSmoker, NeverSmoked };

struct FvcVisit {
  int week = 0;
  double fvc_ml = 0.0;   // > 0
  double percent = 0.0;  // relative FVC, > 0

  bool operator==(const FvcVisit&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<FvcVisit> visits;  // sorted by strictly increasing week
  int age = 0;
  Sex sex = Sex::Male;
  Smoking smoking = Smoking::NeverSmoked;

  const FvcVisit& base_visit() const {
    if (visits.empty()) throw IngestError(IngestErrc::EmptyInput, "no visits");
    return visits.front();
  }

  bool operator==(const PatientRecord&) const = default;
};

const char* to_string(Sex s);
const char* to_string(Smoking s);
Sex sex_from_string(const std::string& s);          // throws BadEnum
Smoking smoking_from_string(const std::string& s);  // throws BadEnum

// Sorts slices by ascending z and checks dimension consistency.
CtVolume assemble_volume(std::string patient_id, std::vector<CtSlice> slices);

// Header must be exactly `Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus`.
// Rows are grouped per patient (demographics from the first row; conflicting
// later rows and duplicate visit weeks are dropped with a warning). Patients
// come back in order of first appearance, visits sorted by week.
std::vector<PatientRecord> parse_metadata_csv(
    const std::string& text, std::vector<std::string>* warnings = nullptr);

extern const char* const kMetadataCsvHeader;

}  // namespace fnet

#endif  // FNET_INGEST_HPP
