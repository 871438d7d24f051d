#include "fnet/dicom.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <limits>
#include <sstream>

namespace fnet {

namespace {

constexpr std::size_t kPreambleLen = 128;
constexpr std::size_t kMagicLen = 4;

struct Tag {
  std::uint16_t group;
  std::uint16_t element;
  bool operator==(const Tag&) const = default;
};

constexpr Tag kImagePosition{0x0020, 0x0032};
constexpr Tag kRows{0x0028, 0x0010};
constexpr Tag kCols{0x0028, 0x0011};
constexpr Tag kBitsAllocated{0x0028, 0x0100};
constexpr Tag kPixelRepresentation{0x0028, 0x0103};
constexpr Tag kRescaleIntercept{0x0028, 0x1052};
constexpr Tag kRescaleSlope{0x0028, 0x1053};
constexpr Tag kPixelData{0x7FE0, 0x0010};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ >= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint16_t u16() {
    need(2, "u16");
    const std::uint16_t v = static_cast<std::uint16_t>(
        bytes_[pos_] | (static_cast<std::uint16_t>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      std::ostringstream os;
      os << "truncated element while reading " << what << " at offset " << pos_;
      throw DicomError(DicomErrc::TruncatedElement, os.str());
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool is_long_vr(char a, char b) {
  return (a == 'O' && b == 'B') || (a == 'O' && b == 'W');
}

std::uint16_t decode_us(std::span<const std::uint8_t> v, const char* what) {
  if (v.size() < 2) {
    throw DicomError(DicomErrc::TruncatedElement,
                     std::string("short US value for ") + what);
  }
  return static_cast<std::uint16_t>(v[0] |
                                    (static_cast<std::uint16_t>(v[1]) << 8));
}

// Decimal strings: backslash-separated numbers, space/NUL padded.
std::vector<double> decode_ds(std::span<const std::uint8_t> v,
                              const char* what) {
  std::string s(reinterpret_cast<const char*>(v.data()), v.size());
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('\\', start);
    if (end == std::string::npos) end = s.size();
    std::string item = s.substr(start, end - start);
    while (!item.empty() && (item.back() == ' ' || item.back() == '\0')) {
      item.pop_back();
    }
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    if (!item.empty()) {
      char* endp = nullptr;
      const double d = std::strtod(item.c_str(), &endp);
      if (endp != item.c_str() + item.size()) {
        throw DicomError(DicomErrc::TruncatedElement,
                         std::string("malformed decimal string in ") + what);
      }
      out.push_back(d);
    }
    if (end == s.size()) break;
    start = end + 1;
  }
  return out;
}

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
  }

  // Short-form element: 16-bit length.
  void element(Tag tag, const char* vr, std::span<const std::uint8_t> value) {
    u16(tag.group);
    u16(tag.element);
    buf_.push_back(static_cast<std::uint8_t>(vr[0]));
    buf_.push_back(static_cast<std::uint8_t>(vr[1]));
    u16(static_cast<std::uint16_t>(value.size()));
    raw(value.data(), value.size());
  }

  // Long-form element (OB/OW): 2 reserved bytes then 32-bit length.
  void element_long(Tag tag, const char* vr,
                    std::span<const std::uint8_t> value) {
    u16(tag.group);
    u16(tag.element);
    buf_.push_back(static_cast<std::uint8_t>(vr[0]));
    buf_.push_back(static_cast<std::uint8_t>(vr[1]));
    u16(0);
    u32(static_cast<std::uint32_t>(value.size()));
    raw(value.data(), value.size());
  }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

std::vector<std::uint8_t> us_bytes(std::uint16_t v) {
  return {static_cast<std::uint8_t>(v & 0xFF), static_cast<std::uint8_t>(v >> 8)};
}

// %.17g round-trips IEEE754 doubles exactly; DS values are padded to even
// length with a trailing space.
std::vector<std::uint8_t> ds_bytes(const std::string& s) {
  std::vector<std::uint8_t> v(s.begin(), s.end());
  if (v.size() % 2 != 0) v.push_back(' ');
  return v;
}

std::string format_double(double d) {
  std::array<char, 32> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.17g", d);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

}  // namespace

void validate(const CtSlice& slice) {
  if (slice.rows < 1 || slice.cols < 1) {
    throw std::invalid_argument("CtSlice: rows and cols must be >= 1");
  }
  if (slice.pixels.size() !=
      static_cast<std::size_t>(slice.rows) * static_cast<std::size_t>(slice.cols)) {
    throw std::invalid_argument("CtSlice: pixel count does not match rows*cols");
  }
  if (slice.rescale_slope == 0.0) {
    throw std::invalid_argument("CtSlice: rescale slope must be nonzero");
  }
}

CtSlice parse_dicom_slice(std::span<const std::uint8_t> bytes,
                          std::string source_id) {
  if (bytes.size() < kPreambleLen + kMagicLen ||
      std::memcmp(bytes.data() + kPreambleLen, "DICM", kMagicLen) != 0) {
    throw DicomError(DicomErrc::MissingMagic, "no DICM magic after preamble");
  }

  Reader r(bytes.subspan(kPreambleLen + kMagicLen));
  CtSlice slice;
  slice.source_id = std::move(source_id);
  bool signed_pixels = true;
  bool have_pixel_data = false;
  std::span<const std::uint8_t> pixel_bytes;

  while (!r.done()) {
    const Tag tag{r.u16(), r.u16()};
    const auto vr0 = static_cast<char>(r.take(1, "VR")[0]);
    const auto vr1 = static_cast<char>(r.take(1, "VR")[0]);
    const std::size_t len = is_long_vr(vr0, vr1)
                                ? (r.u16(), static_cast<std::size_t>(r.u32()))
                                : static_cast<std::size_t>(r.u16());
    const auto value = r.take(len, "element value");

    if (tag == kRows) {
      slice.rows = decode_us(value, "Rows");
    } else if (tag == kCols) {
      slice.cols = decode_us(value, "Columns");
    } else if (tag == kBitsAllocated) {
      const auto bits = decode_us(value, "BitsAllocated");
      if (bits != 16) {
        throw DicomError(DicomErrc::UnsupportedBitsAllocated,
                         "BitsAllocated must be 16, got " + std::to_string(bits));
      }
    } else if (tag == kPixelRepresentation) {
      signed_pixels = decode_us(value, "PixelRepresentation") != 0;
    } else if (tag == kRescaleIntercept) {
      const auto v = decode_ds(value, "RescaleIntercept");
      if (!v.empty()) slice.rescale_intercept = v[0];
    } else if (tag == kRescaleSlope) {
      const auto v = decode_ds(value, "RescaleSlope");
      if (!v.empty()) slice.rescale_slope = v[0];
    } else if (tag == kImagePosition) {
      const auto v = decode_ds(value, "ImagePositionPatient");
      if (v.size() >= 3) slice.z_position = v[2];
    } else if (tag == kPixelData) {
      have_pixel_data = true;
      pixel_bytes = value;
    }
    // Anything else: already skipped by declared length.
  }

  const std::size_t expected =
      2u * static_cast<std::size_t>(slice.rows) * static_cast<std::size_t>(slice.cols);
  if (!have_pixel_data || expected == 0 || pixel_bytes.size() != expected) {
    std::ostringstream os;
    os << "PixelData length " << pixel_bytes.size() << " != 2*" << slice.rows
       << "*" << slice.cols;
    throw DicomError(DicomErrc::PixelLengthMismatch, os.str());
  }

  slice.pixels.resize(static_cast<std::size_t>(slice.rows) *
                      static_cast<std::size_t>(slice.cols));
  for (std::size_t i = 0; i < slice.pixels.size(); ++i) {
    const std::uint16_t raw = static_cast<std::uint16_t>(
        pixel_bytes[2 * i] |
        (static_cast<std::uint16_t>(pixel_bytes[2 * i + 1]) << 8));
    if (signed_pixels) {
      slice.pixels[i] = static_cast<std::int16_t>(raw);
    } else {
      // Unsigned representation: clamp the rare >int16 values.
      slice.pixels[i] = raw > 0x7FFF
                            ? std::numeric_limits<std::int16_t>::max()
                            : static_cast<std::int16_t>(raw);
    }
  }
  validate(slice);
  return slice;
}

std::vector<std::uint8_t> write_dicom_slice(const CtSlice& slice) {
  validate(slice);
  Writer w;
  const std::vector<std::uint8_t> preamble(kPreambleLen, 0);
  w.raw(preamble.data(), preamble.size());
  w.raw("DICM", kMagicLen);

  const std::string ipp =
      "0\\0\\" + format_double(slice.z_position);
  w.element(kImagePosition, "DS", ds_bytes(ipp));
  w.element(kRows, "US", us_bytes(static_cast<std::uint16_t>(slice.rows)));
  w.element(kCols, "US", us_bytes(static_cast<std::uint16_t>(slice.cols)));
  w.element(kBitsAllocated, "US", us_bytes(16));
  w.element(kPixelRepresentation, "US", us_bytes(1));
  w.element(kRescaleIntercept, "DS",
            ds_bytes(format_double(slice.rescale_intercept)));
  w.element(kRescaleSlope, "DS", ds_bytes(format_double(slice.rescale_slope)));

  std::vector<std::uint8_t> px(slice.pixels.size() * 2);
  for (std::size_t i = 0; i < slice.pixels.size(); ++i) {
    const auto raw = static_cast<std::uint16_t>(slice.pixels[i]);
    px[2 * i] = static_cast<std::uint8_t>(raw & 0xFF);
    px[2 * i + 1] = static_cast<std::uint8_t>(raw >> 8);
  }
  w.element_long(kPixelData, "OW", px);
  return w.take();
}

}  // namespace fnet
