#ifndef FNET_CONFIG_JSON_HPP
#define FNET_CONFIG_JSON_HPP

#include <string>

#include "fnet/backbone.hpp"
#include "fnet/cohort_synth.hpp"
#include "fnet/elastic_net.hpp"
#include "fnet/predictor.hpp"
#include "fnet/preprocess.hpp"
#include "fnet/quantile.hpp"

// JSON round trips for every on-disk config and fitted meta-regressor.
// Field names follow the documented schemas; unknown keys are rejected so a
// typo in an override file fails loudly.

namespace fnet {

std::string to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const std::string& text);

std::string to_json(const BackboneConfig& cfg);
BackboneConfig backbone_config_from_json(const std::string& text);

std::string to_json(const EnsembleConfig& cfg);
EnsembleConfig ensemble_config_from_json(const std::string& text);

std::string to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const std::string& text);

std::string to_json(const EncodingStats& stats);
EncodingStats encoding_stats_from_json(const std::string& text);

std::string to_json(const ElasticNetModel& model);
ElasticNetModel elastic_net_from_json(const std::string& text);

std::string to_json(const QuantileModel& model);
QuantileModel quantile_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace fnet

#endif  // FNET_CONFIG_JSON_HPP
