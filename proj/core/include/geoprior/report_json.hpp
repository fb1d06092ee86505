#pragma once

#include <string>

#include "geoprior/dataio.hpp"
#include "geoprior/phenomena.hpp"
#include "geoprior/pipeline.hpp"

namespace geoprior {

// JSON renderings with a fixed key order, so equal inputs give equal bytes.
// Non-finite numbers are written as null. indent < 0 gives compact output.

std::string to_json(const PipelineConfig& config, int indent = 2);
std::string to_json(const SynthConfig& config, int indent = 2);
std::string to_json(const RunReport& report, int indent = 2);
std::string to_json(const PhenomenaReport& report, int indent = 2);

std::string to_string(ScoreMode mode);
std::string to_string(LrDecay decay);
std::string to_string(FurScaling scaling);
std::string to_string(TailAllocation allocation);
std::string to_string(ClassGroup group);

}  // namespace geoprior
