#pragma once

#include "json.hpp"
#include "purekit/train_config.hpp"

namespace purekit {

using ordered_json = nlohmann::ordered_json;

ordered_json generator_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_from_json(const ordered_json& j);

ordered_json discriminator_to_json(const DiscriminatorConfig& cfg);
DiscriminatorConfig discriminator_from_json(const ordered_json& j);

ordered_json classifier_to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_from_json(const ordered_json& j);

ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const ordered_json& j);

}  // namespace purekit
