#ifndef HOSPX_MODEL_IO_H_
#define HOSPX_MODEL_IO_H_

#include <string>

#include "hospx/training.h"

namespace hospx {

// Binary container: magic, format version, JSON header (family, hyper-
// parameters, provenance, shapes), then trees or network parameters.
void WriteModel(const TrainedModel& model, const std::string& path);
// Throws Error(kMissingArtifact) for a missing file, Error(kIo) for a
// corrupt one.
TrainedModel ReadModel(const std::string& path);

}  // namespace hospx

#endif  // HOSPX_MODEL_IO_H_
