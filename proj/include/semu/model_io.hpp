#pragma once

#include <string>

#include "semu/codec.hpp"

namespace semu {

// Self-describing text documents: architecture line by line, then parameter
// arrays printed as hex floats so a load round-trips bit-exactly.
void save_codec(const SemanticCodec& codec, const std::string& path);
SemanticCodec load_codec(const std::string& path);

void save_classifier(const DownstreamClassifier& cls, const std::string& path);
DownstreamClassifier load_classifier(const std::string& path);

}  // namespace semu
