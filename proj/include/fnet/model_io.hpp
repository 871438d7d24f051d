#ifndef FNET_MODEL_IO_HPP
#define FNET_MODEL_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fnet/optimize.hpp"
#include "fnet/predictor.hpp"

namespace fnet {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter container format: magic "FNET1", then per parameter
//   u32 name length (LE), UTF-8 name, u32 rank, u32 dims[rank],
//   raw 32-bit LE floats.
// Parameters appear in store (creation) order; reading stops at EOF.
std::vector<std::uint8_t> serialize_params(const ParamStore<float>& params);
void deserialize_params(const std::vector<std::uint8_t>& bytes,
                        ParamStore<float>& params);

void save_params(const ParamStore<float>& params, const std::string& path);
void load_params(const std::string& path, ParamStore<float>& params);

// Model bundle directory:
//   params.bin     backbone + slope head tensors (format above)
//   backbone.json  preprocess.json  stats.json  ensemble.json
//   enet.json      quantile.json
void save_model(const FibrosisModel& model, const std::string& dir);
FibrosisModel load_model(const std::string& dir);

}  // namespace fnet

#endif  // FNET_MODEL_IO_HPP
