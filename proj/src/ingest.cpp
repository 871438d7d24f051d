#include "fnet/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <sstream>

namespace fnet {

const char* const kMetadataCsvHeader =
    "Patient,Weeks,FVC,Percent,Age,Sex,SmokingStatus";

const char* to_string(Sex s) { return s == Sex::Male ? "Male" : "Female"; }

const char* to_string(Smoking s) {
  switch (s) {
    case Smoking::CurrentlySmokes:
      return "Currently smokes";
    case Smoking::ExSmoker:
      return "Ex-smoker";
    case Smoking::NeverSmoked:
      return "Never smoked";
  }
  return "Never smoked";
}

Sex sex_from_string(const std::string& s) {
  if (s == "Male") return Sex::Male;
  if (s == "Female") return Sex::Female;
  throw IngestError(IngestErrc::BadEnum, "unknown sex value: " + s);
}

Smoking smoking_from_string(const std::string& s) {
  if (s == "Currently smokes") return Smoking::CurrentlySmokes;
  if (s == "Ex-smoker") return Smoking::ExSmoker;
  if (s == "Never smoked") return Smoking::NeverSmoked;
  throw IngestError(IngestErrc::BadEnum, "unknown smoking status: " + s);
}

CtVolume assemble_volume(std::string patient_id, std::vector<CtSlice> slices) {
  if (slices.empty()) {
    throw IngestError(IngestErrc::EmptyInput, "assemble_volume: no slices");
  }
  const int rows = slices.front().rows;
  const int cols = slices.front().cols;
  for (const auto& s : slices) {
    if (s.rows != rows || s.cols != cols) {
      std::ostringstream os;
      os << "slice " << s.source_id << " is " << s.rows << "x" << s.cols
         << ", expected " << rows << "x" << cols;
      throw IngestError(IngestErrc::DimensionMismatch, os.str());
    }
  }
  std::stable_sort(slices.begin(), slices.end(),
                   [](const CtSlice& a, const CtSlice& b) {
                     return a.z_position < b.z_position;
                   });
  for (std::size_t i = 1; i < slices.size(); ++i) {
    if (slices[i].z_position == slices[i - 1].z_position) {
      std::ostringstream os;
      os << "two slices at z=" << slices[i].z_position;
      throw IngestError(IngestErrc::DuplicateZ, os.str());
    }
  }
  return CtVolume{std::move(patient_id), std::move(slices)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(',', start);
    if (end == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

double parse_number(const std::string& s, const char* field, int line_no) {
  char* endp = nullptr;
  const std::string trimmed = s;
  const double v = std::strtod(trimmed.c_str(), &endp);
  if (trimmed.empty() || endp != trimmed.c_str() + trimmed.size()) {
    std::ostringstream os;
    os << "non-numeric " << field << " value '" << s << "' on line " << line_no;
    throw IngestError(IngestErrc::NonNumericField, os.str());
  }
  return v;
}

}  // namespace

std::vector<PatientRecord> parse_metadata_csv(
    const std::string& text, std::vector<std::string>* warnings) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestError(IngestErrc::BadHeader, "empty metadata CSV");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetadataCsvHeader) {
    throw IngestError(IngestErrc::BadHeader,
                      "bad metadata header: '" + line + "'");
  }

  std::vector<PatientRecord> records;
  std::map<std::string, std::size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      std::ostringstream os;
      os << "expected 7 fields, got " << fields.size() << " on line " << line_no;
      throw IngestError(IngestErrc::NonNumericField, os.str());
    }

    FvcVisit visit;
    visit.week = static_cast<int>(parse_number(fields[1], "Weeks", line_no));
    visit.fvc_ml = parse_number(fields[2], "FVC", line_no);
    visit.percent = parse_number(fields[3], "Percent", line_no);
    if (visit.fvc_ml <= 0 || visit.percent <= 0) {
      std::ostringstream os;
      os << "FVC and Percent must be positive on line " << line_no;
      throw IngestError(IngestErrc::NonNumericField, os.str());
    }
    const int age = static_cast<int>(parse_number(fields[4], "Age", line_no));
    const Sex sex = sex_from_string(fields[5]);
    const Smoking smoking = smoking_from_string(fields[6]);

    auto it = index.find(fields[0]);
    if (it == index.end()) {
      index.emplace(fields[0], records.size());
      PatientRecord rec;
      rec.patient_id = fields[0];
      rec.age = age;
      rec.sex = sex;
      rec.smoking = smoking;
      rec.visits.push_back(visit);
      records.push_back(std::move(rec));
    } else {
      PatientRecord& rec = records[it->second];
      if ((age != rec.age || sex != rec.sex || smoking != rec.smoking) &&
          warnings) {
        warnings->push_back("conflicting demographics for " + rec.patient_id +
                            " on line " + std::to_string(line_no) +
                            " ignored");
      }
      rec.visits.push_back(visit);
    }
  }

  for (auto& rec : records) {
    std::stable_sort(
        rec.visits.begin(), rec.visits.end(),
        [](const FvcVisit& a, const FvcVisit& b) { return a.week < b.week; });
    // Keep the first row for a duplicated week so visit weeks stay strictly
    // increasing.
    auto last = std::unique(rec.visits.begin(), rec.visits.end(),
                            [](const FvcVisit& a, const FvcVisit& b) {
                              return a.week == b.week;
                            });
    if (last != rec.visits.end() && warnings) {
      warnings->push_back("duplicate visit weeks for " + rec.patient_id +
                          " dropped");
    }
    rec.visits.erase(last, rec.visits.end());
  }
  return records;
}

}  // namespace fnet
