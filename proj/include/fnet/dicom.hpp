#ifndef FNET_DICOM_HPP
#define FNET_DICOM_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fnet {

enum class DicomErrc {
  MissingMagic,
  TruncatedElement,
  PixelLengthMismatch,
  UnsupportedBitsAllocated,
};

class DicomError : public std::runtime_error {
 public:
  DicomError(DicomErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  DicomErrc code() const { return code_; }

 private:
  DicomErrc code_;
};

// One CT slice as stored on disk: raw detector values plus the affine rescale
// that maps them to Hounsfield units, and the patient-axis z position.
struct CtSlice {
  int rows = 0;
  int cols = 0;
  std::vector<std::int16_t> pixels;  // row-major, rows*cols
  double rescale_slope = 1.0;        // HU per raw unit, nonzero
  double rescale_intercept = 0.0;    // HU
  double z_position = 0.0;           // mm along the patient axis
  std::string source_id;

  bool operator==(const CtSlice&) const = default;
};

void validate(const CtSlice& slice);

// Reads the explicit-VR little-endian subset: 128-byte preamble, "DICM",
// then data elements in ascending tag order. Recognized tags:
//   (0020,0032) ImagePositionPatient  (0028,0010) Rows
//   (0028,0011) Columns               (0028,0100) BitsAllocated
//   (0028,0103) PixelRepresentation   (0028,1052) RescaleIntercept
//   (0028,1053) RescaleSlope          (7FE0,0010) PixelData
// Unknown tags are skipped by their declared length. Missing RescaleSlope
// defaults to 1.0 and missing RescaleIntercept to 0.0; a missing
// PixelRepresentation is treated as signed.
CtSlice parse_dicom_slice(std::span<const std::uint8_t> bytes,
                          std::string source_id = {});

// Emits exactly the element subset parse_dicom_slice reads, in ascending tag
// order, such that parse(write(s)) == s bit-exactly (source_id excepted; the
// parser takes it from its caller).
std::vector<std::uint8_t> write_dicom_slice(const CtSlice& slice);

}  // namespace fnet

#endif  // FNET_DICOM_HPP
