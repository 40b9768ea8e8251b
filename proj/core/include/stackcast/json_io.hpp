#pragma once

// nlohmann::json conversions for configuration and parameter types.
// Config readers start from the existing value, so a document may set any
// subset of fields; unknown keys are rejected with Error(kConfigInvalid).

#include <nlohmann/json.hpp>

#include "stackcast/ensemble.hpp"
#include "stackcast/gbdt/booster.hpp"
#include "stackcast/lstm.hpp"

namespace stackcast::gbdt {

void to_json(nlohmann::json& out, const GossConfig& config);
void from_json(const nlohmann::json& in, GossConfig& config);
void to_json(nlohmann::json& out, const BoostConfig& config);
void from_json(const nlohmann::json& in, BoostConfig& config);

}  // namespace stackcast::gbdt

namespace stackcast::lstm {

void to_json(nlohmann::json& out, const LstmConfig& config);
void from_json(const nlohmann::json& in, LstmConfig& config);
void to_json(nlohmann::json& out, const LstmParams& params);
void from_json(const nlohmann::json& in, LstmParams& params);

}  // namespace stackcast::lstm

namespace stackcast::ensemble {

void to_json(nlohmann::json& out, const EnsembleConfig& config);
void from_json(const nlohmann::json& in, EnsembleConfig& config);

}  // namespace stackcast::ensemble

namespace stackcast {

// Throws Error(kConfigInvalid) naming the first key of `in` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& in, std::initializer_list<const char*> allowed,
                         const char* context);

}  // namespace stackcast
